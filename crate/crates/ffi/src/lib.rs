//! C ABI over `fracamg`.
//!
//! Every fallible call returns a [`FracamgStatus`]; on failure the message is
//! kept per thread and read back with [`fracamg_last_error_message`].
//! Systems are opaque handles owned by the caller and released with
//! [`fracamg_system_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use fracamg::assembly::{coefficient_matrix, is_m_matrix_condition, l2_error, mass, stiffness};
use fracamg::march::march;
use fracamg::problem::{check_orders, ProblemSpec};
use fracamg::solvers::amg::{theta_reference, AmgHierarchy};
use fracamg::solvers::{solve, SolverConfig};
use fracamg::spectral::{extreme_eigs, EigMethod};
use fracamg::timegrid::TimeGrid;
use fracamg::toeplitz::ToeplitzOperator;
use fracamg::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracamgStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Dimension = 3,
    NotConverged = 4,
    Solver = 5,
    Config = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FracamgSolver {
    Jacobi = 0,
    Cg = 1,
    Amg = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FracamgSolveInfo {
    pub iterations: usize,
    /// Final relative residual.
    pub residual: f64,
    pub converged: bool,
}

/// Coefficient matrix of one time step, with its FFT plan and a lazily built
/// AMG hierarchy.
pub struct FracamgSystem {
    op: ToeplitzOperator,
    hierarchy: Option<AmgHierarchy>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> FracamgStatus {
    match e {
        Error::Domain(_) | Error::OutOfRange { .. } => FracamgStatus::Domain,
        Error::DimensionMismatch { .. } => FracamgStatus::Dimension,
        Error::NotConverged { .. } => FracamgStatus::NotConverged,
        Error::Config(_) | Error::Parse { .. } => FracamgStatus::Config,
        _ => FracamgStatus::Solver,
    }
}

/// Runs `f`, recording errors and caught panics as the last error.
fn guard(f: impl FnOnce() -> Result<(), FracamgStatus>) -> FracamgStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FracamgStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FracamgStatus::Panic
        }
    }
}

trait OrStatus<T> {
    fn or_status(self) -> Result<T, FracamgStatus>;
}

impl<T> OrStatus<T> for fracamg::Result<T> {
    fn or_status(self) -> Result<T, FracamgStatus> {
        self.map_err(|e| {
            set_error(e.to_string());
            status_of(&e)
        })
    }
}

fn non_null<T>(p: *const T, what: &str) -> Result<(), FracamgStatus> {
    if p.is_null() {
        set_error(format!("{what} is null"));
        return Err(FracamgStatus::NullPointer);
    }
    Ok(())
}

fn check_len(n: usize, dim: usize) -> Result<(), FracamgStatus> {
    if n != dim {
        set_error(format!("dimension mismatch: expected {dim}, got {n}"));
        return Err(FracamgStatus::Dimension);
    }
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fracamg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Byte length of the last error message on this thread, excluding the NUL;
/// 0 when the last call succeeded.
#[no_mangle]
pub extern "C" fn fracamg_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(0, |c| c.as_bytes().len()))
}

/// Copies the last error message into `buf` (NUL-terminated). Returns the
/// number of bytes written excluding the NUL, or -1 when `buf` is null or
/// shorter than `fracamg_last_error_length() + 1`.
///
/// # Safety
/// `buf` must be valid for writes of `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn fracamg_last_error_message(buf: *mut c_char, len: usize) -> isize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let bytes = e.as_ref().map_or(&[][..], |c| c.as_bytes());
        if buf.is_null() || len < bytes.len() + 1 {
            return -1;
        }
        ptr::copy_nonoverlapping(bytes.as_ptr(), buf.cast::<u8>(), bytes.len());
        *buf.add(bytes.len()) = 0;
        bytes.len() as isize
    })
}

/// Builds `C = M + w(alpha, tau) A` on `cells` uniform cells of `(0, 1)`.
/// The system has `cells - 1` unknowns.
///
/// # Safety
/// `out` must be valid for a pointer write.
#[no_mangle]
pub unsafe extern "C" fn fracamg_system_new(
    alpha: f64,
    beta: f64,
    cells: usize,
    tau: f64,
    out: *mut *mut FracamgSystem,
) -> FracamgStatus {
    guard(|| {
        non_null(out, "out")?;
        *out = ptr::null_mut();
        check_orders(alpha, beta).or_status()?;
        if !(tau > 0.0 && tau.is_finite()) {
            set_error(format!("parameter out of domain: tau = {tau}"));
            return Err(FracamgStatus::Domain);
        }
        if cells < 2 {
            set_error(format!("parameter out of domain: cells = {cells}"));
            return Err(FracamgStatus::Domain);
        }
        let h = 1.0 / cells as f64;
        let m = mass(cells, h).or_status()?;
        let a = stiffness(beta, cells, h).or_status()?;
        let c = coefficient_matrix(alpha, tau, &m, &a).or_status()?;
        let sys = FracamgSystem { op: ToeplitzOperator::new(c), hierarchy: None };
        *out = Box::into_raw(Box::new(sys));
        Ok(())
    })
}

/// Releases a system; null is ignored.
///
/// # Safety
/// `sys` must come from [`fracamg_system_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn fracamg_system_free(sys: *mut FracamgSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Number of unknowns, or 0 for a null handle.
///
/// # Safety
/// `sys` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fracamg_system_dim(sys: *const FracamgSystem) -> usize {
    sys.as_ref().map_or(0, |s| s.op.dim())
}

/// First row of the symmetric Toeplitz matrix, `n` entries.
///
/// # Safety
/// `sys` must be a live handle and `row` valid for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn fracamg_system_first_row(
    sys: *const FracamgSystem,
    row: *mut f64,
    n: usize,
) -> FracamgStatus {
    guard(|| {
        non_null(sys, "sys")?;
        non_null(row, "row")?;
        let s = &*sys;
        check_len(n, s.op.dim())?;
        slice::from_raw_parts_mut(row, n).copy_from_slice(s.op.matrix().first_row());
        Ok(())
    })
}

/// `y = C x` by FFT.
///
/// # Safety
/// `sys` must be a live handle; `x` and `y` valid for `n` reads and writes.
#[no_mangle]
pub unsafe extern "C" fn fracamg_system_matvec(
    sys: *const FracamgSystem,
    x: *const f64,
    y: *mut f64,
    n: usize,
) -> FracamgStatus {
    guard(|| {
        non_null(sys, "sys")?;
        non_null(x, "x")?;
        non_null(y, "y")?;
        let s = &*sys;
        check_len(n, s.op.dim())?;
        let r = s.op.apply(slice::from_raw_parts(x, n)).or_status()?;
        slice::from_raw_parts_mut(y, n).copy_from_slice(&r);
        Ok(())
    })
}

/// Solves `C x = b` from a zero start to relative residual `tol`.
/// `x` receives the last iterate even when the status is `NotConverged`.
/// `info` may be null.
///
/// # Safety
/// `sys` must be a live handle not used concurrently; `b` and `x` valid for
/// `n` reads and writes; `info` null or valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fracamg_system_solve(
    sys: *mut FracamgSystem,
    solver: FracamgSolver,
    tol: f64,
    max_iters: usize,
    b: *const f64,
    x: *mut f64,
    n: usize,
    info: *mut FracamgSolveInfo,
) -> FracamgStatus {
    guard(|| {
        non_null(sys, "sys")?;
        non_null(b, "b")?;
        non_null(x, "x")?;
        let s = &mut *sys;
        check_len(n, s.op.dim())?;
        let config = match solver {
            FracamgSolver::Jacobi => SolverConfig::jacobi(),
            FracamgSolver::Cg => SolverConfig::cg(),
            FracamgSolver::Amg => SolverConfig::amg(),
        }
        .with_tol(tol)
        .with_max_iters(max_iters);
        config.validate().or_status()?;
        let (sol, report) = solve(&s.op, &mut s.hierarchy, slice::from_raw_parts(b, n), None, &config, None)
            .or_status()?;
        slice::from_raw_parts_mut(x, n).copy_from_slice(&sol);
        if let Some(i) = info.as_mut() {
            *i = FracamgSolveInfo {
                iterations: report.iterations,
                residual: report.final_residual(),
                converged: report.converged,
            };
        }
        report.require_converged().or_status()
    })
}

/// Smallest and largest eigenvalues of `C`.
///
/// # Safety
/// `sys` must be a live handle; `lambda_min`, `lambda_max` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn fracamg_system_extreme_eigs(
    sys: *const FracamgSystem,
    lambda_min: *mut f64,
    lambda_max: *mut f64,
) -> FracamgStatus {
    guard(|| {
        non_null(sys, "sys")?;
        non_null(lambda_min, "lambda_min")?;
        non_null(lambda_max, "lambda_max")?;
        let r = extreme_eigs((*sys).op.matrix(), EigMethod::Auto).or_status()?;
        *lambda_min = r.lambda_min;
        *lambda_max = r.lambda_max;
        Ok(())
    })
}

/// Reference strength threshold `|c_13| / |c_12| + epsilon0`.
///
/// # Safety
/// `sys` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fracamg_system_theta_reference(
    sys: *const FracamgSystem,
    epsilon0: f64,
    out: *mut f64,
) -> FracamgStatus {
    guard(|| {
        non_null(sys, "sys")?;
        non_null(out, "out")?;
        *out = theta_reference((*sys).op.matrix(), epsilon0).or_status()?;
        Ok(())
    })
}

/// Whether `tau^alpha / h^{2 beta}` exceeds the M-matrix threshold.
#[no_mangle]
pub extern "C" fn fracamg_is_m_matrix(alpha: f64, beta: f64, tau: f64, h: f64) -> bool {
    is_m_matrix_condition(alpha, beta, tau, h)
}

/// Marches the built-in model problem to `t = 1` with `steps` uniform steps
/// on `cells` cells and writes the discrete L2 error at the final time.
///
/// # Safety
/// `error` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn fracamg_example_error(
    alpha: f64,
    beta: f64,
    cells: usize,
    steps: usize,
    solver: FracamgSolver,
    error: *mut f64,
) -> FracamgStatus {
    guard(|| {
        non_null(error, "error")?;
        let grid = TimeGrid::uniform(1.0, steps).or_status()?;
        let spec = ProblemSpec::manufactured(alpha, beta, cells, grid).or_status()?;
        let config = match solver {
            FracamgSolver::Jacobi => SolverConfig::jacobi(),
            FracamgSolver::Cg => SolverConfig::cg(),
            FracamgSolver::Amg => SolverConfig::amg(),
        };
        let result = march(&spec, &config).or_status()?;
        *error = l2_error(&spec, result.final_state()).or_status()?;
        Ok(())
    })
}
