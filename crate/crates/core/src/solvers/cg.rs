use std::time::Instant;

use super::{initial_guess, Method, SolveReport};
use crate::dense::{axpy, dot, norm2};
use crate::error::{Error, Result};
use crate::toeplitz::ToeplitzOperator;

/// Conjugate gradients with FFT products; stops once the recursively updated
/// residual satisfies `||r|| <= tol ||b||`.
pub fn cg_solve(
    op: &ToeplitzOperator,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    if !(op.matrix().diagonal() > 0.0) {
        return Err(Error::Domain("CG needs a positive diagonal".into()));
    }
    let (mut x, bnorm) = initial_guess(op.dim(), b, x0)?;
    let mut report = SolveReport::start(Method::Cg);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        report.converged = true;
        report.residual_history.push(0.0);
        report.wall_time = start.elapsed();
        return Ok((x, report));
    }
    let mut scratch = op.plan().scratch();
    let mut r = op.residual(b, &x, &mut scratch)?;
    let mut p = r.clone();
    let mut ap = vec![0.0; op.dim()];
    let mut rr = dot(&r, &r);
    report.residual_history.push(rr.sqrt() / bnorm);
    while rr.sqrt() > tol * bnorm {
        if report.iterations >= max_iters {
            break;
        }
        op.apply_with(&p, &mut ap, &mut scratch)?;
        let curvature = dot(&p, &ap);
        if !(curvature > 0.0) {
            return Err(Error::CgBreakdown { iteration: report.iterations, curvature });
        }
        let step = rr / curvature;
        axpy(step, &p, &mut x);
        axpy(-step, &ap, &mut r);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        report.iterations += 1;
        report.residual_history.push(norm2(&r) / bnorm);
    }
    report.converged = rr.sqrt() <= tol * bnorm;
    report.wall_time = start.elapsed();
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toeplitz::SymToeplitz;

    #[test]
    fn recovers_ones() {
        let row: Vec<f64> = (0..64).map(|k| if k == 0 { 4.0 } else { -1.0 / (k * k) as f64 }).collect();
        let op = ToeplitzOperator::new(SymToeplitz::new(row).unwrap());
        let b = op.apply(&vec![1.0; 64]).unwrap();
        let (x, rep) = cg_solve(&op, &b, None, 1e-12, 1000).unwrap();
        assert!(rep.converged);
        assert!(x.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn breakdown_on_indefinite_matrix() {
        let op = ToeplitzOperator::new(SymToeplitz::new(vec![1.0, -2.0, 0.0]).unwrap());
        let err = cg_solve(&op, &[1.0, 1.0, 1.0], None, 1e-12, 100).unwrap_err();
        assert!(matches!(err, Error::CgBreakdown { .. }), "{err}");
    }

    #[test]
    fn reports_non_convergence() {
        let row: Vec<f64> = (0..200).map(|k| if k == 0 { 2.0 } else if k == 1 { -1.0 } else { 0.0 }).collect();
        let op = ToeplitzOperator::new(SymToeplitz::new(row).unwrap());
        let (_, rep) = cg_solve(&op, &vec![1.0; 200], None, 1e-14, 5).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 5);
        assert!(rep.require_converged().is_err());
    }
}
