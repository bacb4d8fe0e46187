#ifndef FRACAMG_H
#define FRACAMG_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  FRACAMG_STATUS_OK = 0,
  FRACAMG_STATUS_NULL_POINTER = 1,
  FRACAMG_STATUS_DOMAIN = 2,
  FRACAMG_STATUS_DIMENSION = 3,
  FRACAMG_STATUS_NOT_CONVERGED = 4,
  FRACAMG_STATUS_SOLVER = 5,
  FRACAMG_STATUS_CONFIG = 6,
  FRACAMG_STATUS_PANIC = 7,
} FracamgStatus;

typedef enum {
  FRACAMG_SOLVER_JACOBI = 0,
  FRACAMG_SOLVER_CG = 1,
  FRACAMG_SOLVER_AMG = 2,
} FracamgSolver;

/**
 * Coefficient matrix of one time step, with its FFT plan and a lazily built
 * AMG hierarchy.
 */
typedef struct FracamgSystem FracamgSystem;

typedef struct {
  size_t iterations;
  /**
   * Final relative residual.
   */
  double residual;
  bool converged;
} FracamgSolveInfo;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *fracamg_version(void);

/**
 * Byte length of the last error message on this thread, excluding the NUL;
 * 0 when the last call succeeded.
 */
size_t fracamg_last_error_length(void);

/**
 * Copies the last error message into `buf` (NUL-terminated). Returns the
 * number of bytes written excluding the NUL, or -1 when `buf` is null or
 * shorter than `fracamg_last_error_length() + 1`.
 *
 * # Safety
 * `buf` must be valid for writes of `len` bytes.
 */
ptrdiff_t fracamg_last_error_message(char *buf, size_t len);

/**
 * Builds `C = M + w(alpha, tau) A` on `cells` uniform cells of `(0, 1)`.
 * The system has `cells - 1` unknowns.
 *
 * # Safety
 * `out` must be valid for a pointer write.
 */
FracamgStatus fracamg_system_new(double alpha,
                                 double beta,
                                 size_t cells,
                                 double tau,
                                 FracamgSystem **out);

/**
 * Releases a system; null is ignored.
 *
 * # Safety
 * `sys` must come from [`fracamg_system_new`] and not be used afterwards.
 */
void fracamg_system_free(FracamgSystem *sys);

/**
 * Number of unknowns, or 0 for a null handle.
 *
 * # Safety
 * `sys` must be null or a live handle.
 */
size_t fracamg_system_dim(const FracamgSystem *sys);

/**
 * First row of the symmetric Toeplitz matrix, `n` entries.
 *
 * # Safety
 * `sys` must be a live handle and `row` valid for `n` writes.
 */
FracamgStatus fracamg_system_first_row(const FracamgSystem *sys, double *row, size_t n);

/**
 * `y = C x` by FFT.
 *
 * # Safety
 * `sys` must be a live handle; `x` and `y` valid for `n` reads and writes.
 */
FracamgStatus fracamg_system_matvec(const FracamgSystem *sys, const double *x, double *y, size_t n);

/**
 * Solves `C x = b` from a zero start to relative residual `tol`.
 * `x` receives the last iterate even when the status is `NotConverged`.
 * `info` may be null.
 *
 * # Safety
 * `sys` must be a live handle not used concurrently; `b` and `x` valid for
 * `n` reads and writes; `info` null or valid for a write.
 */
FracamgStatus fracamg_system_solve(FracamgSystem *sys,
                                   FracamgSolver solver,
                                   double tol,
                                   size_t max_iters,
                                   const double *b,
                                   double *x,
                                   size_t n,
                                   FracamgSolveInfo *info);

/**
 * Smallest and largest eigenvalues of `C`.
 *
 * # Safety
 * `sys` must be a live handle; `lambda_min`, `lambda_max` valid for writes.
 */
FracamgStatus fracamg_system_extreme_eigs(const FracamgSystem *sys,
                                          double *lambda_min,
                                          double *lambda_max);

/**
 * Reference strength threshold `|c_13| / |c_12| + epsilon0`.
 *
 * # Safety
 * `sys` must be a live handle; `out` valid for a write.
 */
FracamgStatus fracamg_system_theta_reference(const FracamgSystem *sys,
                                             double epsilon0,
                                             double *out);

/**
 * Whether `tau^alpha / h^{2 beta}` exceeds the M-matrix threshold.
 */
bool fracamg_is_m_matrix(double alpha, double beta, double tau, double h);

/**
 * Marches the built-in model problem to `t = 1` with `steps` uniform steps
 * on `cells` cells and writes the discrete L2 error at the final time.
 *
 * # Safety
 * `error` must be valid for a write.
 */
FracamgStatus fracamg_example_error(double alpha,
                                    double beta,
                                    size_t cells,
                                    size_t steps,
                                    FracamgSolver solver,
                                    double *error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FRACAMG_H */
