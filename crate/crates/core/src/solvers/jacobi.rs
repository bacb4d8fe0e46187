use std::time::Instant;

use super::{check_omega, initial_guess, Method, SolveReport};
use crate::dense::norm2;
use crate::error::{Error, Result};
use crate::toeplitz::ToeplitzOperator;

/// Damped Jacobi `x <- x + omega D^{-1} (b - A x)`; stops once
/// `||b - A x|| <= tol ||b||`.
pub fn jacobi_solve(
    op: &ToeplitzOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    omega: f64,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    check_omega(omega)?;
    let start = Instant::now();
    let diag = op.matrix().diagonal();
    if !(diag > 0.0) {
        return Err(Error::Domain(format!("Jacobi needs a positive diagonal, got {diag:e}")));
    }
    let (mut x, bnorm) = initial_guess(op.dim(), b, x0)?;
    let mut report = SolveReport::start(Method::Jacobi);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        report.converged = true;
        report.residual_history.push(0.0);
        report.wall_time = start.elapsed();
        return Ok((x, report));
    }
    let mut scratch = op.plan().scratch();
    let step = omega / diag;
    loop {
        let r = op.residual(b, &x, &mut scratch)?;
        let rel = norm2(&r) / bnorm;
        report.residual_history.push(rel);
        if rel <= tol {
            report.converged = true;
            break;
        }
        if report.iterations >= max_iters || !rel.is_finite() {
            break;
        }
        for (xi, ri) in x.iter_mut().zip(&r) {
            *xi += step * ri;
        }
        report.iterations += 1;
    }
    report.wall_time = start.elapsed();
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toeplitz::SymToeplitz;

    #[test]
    fn identity_converges_in_one_step() {
        let op = ToeplitzOperator::new(SymToeplitz::identity(10));
        let b: Vec<f64> = (0..10).map(|i| i as f64 - 3.0).collect();
        let (x, rep) = jacobi_solve(&op, &b, None, 1.0, 1e-12, 100).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        assert_eq!(x, b);
    }

    #[test]
    fn zero_rhs_returns_zero() {
        let op = ToeplitzOperator::new(SymToeplitz::new(vec![2.0, -0.5]).unwrap());
        let (x, rep) = jacobi_solve(&op, &[0.0, 0.0], Some(&[1.0, 1.0]), 1.0, 1e-12, 10).unwrap();
        assert_eq!(x, vec![0.0, 0.0]);
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn diverges_when_not_diagonally_dominant() {
        // tridiag(-1, 1, -1): D^{-1}A has eigenvalues 1 - 2cos(k pi/(n+1)), so
        // the Jacobi iteration matrix has spectral radius ~ 2
        let op = ToeplitzOperator::new(SymToeplitz::new(
            std::iter::once(1.0).chain(std::iter::once(-1.0)).chain(std::iter::repeat_n(0.0, 18)).collect(),
        ).unwrap());
        let b = vec![1.0; 20];
        let (_, rep) = jacobi_solve(&op, &b, None, 1.0, 1e-12, 50).unwrap();
        assert!(!rep.converged);
        let h = &rep.residual_history;
        assert!(h.last().unwrap() > &(1e3 * h[0]));
    }

    #[test]
    fn rejects_bad_omega() {
        let op = ToeplitzOperator::new(SymToeplitz::identity(3));
        assert!(jacobi_solve(&op, &[1.0; 3], None, 0.0, 1e-12, 10).is_err());
        assert!(jacobi_solve(&op, &[1.0; 3], None, 1.5, 1e-12, 10).is_err());
    }
}
