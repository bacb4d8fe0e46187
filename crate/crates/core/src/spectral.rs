//! Extreme eigenvalues and condition numbers of symmetric Toeplitz matrices.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::dense::{dot, norm2};
use crate::error::{Error, Result};
use crate::toeplitz::{CirculantPlan, SymToeplitz};

/// Largest dimension handled by the dense eigensolver under [`EigMethod::Auto`].
pub const DENSE_LIMIT: usize = 1024;
/// Eigen-residuals must satisfy `||C v - lambda v|| <= RESIDUAL_TOL ||C||_1`.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigMethod {
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub kappa: f64,
    /// `Dense` or `Lanczos`, never `Auto`.
    pub method: EigMethod,
    /// `||C v - lambda v||_2` for the (min, max) pairs.
    pub residuals: [f64; 2],
}

pub fn extreme_eigs(a: &SymToeplitz, method: EigMethod) -> Result<SpectralReport> {
    let method = match method {
        EigMethod::Auto if a.dim() <= DENSE_LIMIT => EigMethod::Dense,
        EigMethod::Auto => EigMethod::Lanczos,
        m => m,
    };
    let (lo, hi, res) = match method {
        EigMethod::Dense => dense_extremes(a)?,
        _ => lanczos_extremes(a)?,
    };
    let kappa = if lo == 0.0 { f64::INFINITY } else { (hi / lo).abs() };
    Ok(SpectralReport { lambda_min: lo, lambda_max: hi, kappa, method, residuals: res })
}

fn dense_extremes(a: &SymToeplitz) -> Result<(f64, f64, [f64; 2])> {
    let n = a.dim();
    let m = DMatrix::from_fn(n, n, |i, j| a.entry(i, j));
    let eig = SymmetricEigen::new(m.clone());
    let (imin, imax) = argminmax(eig.eigenvalues.as_slice());
    let mut res = [0.0; 2];
    for (slot, idx) in [imin, imax].into_iter().enumerate() {
        let v = eig.eigenvectors.column(idx);
        res[slot] = (&m * v - v * eig.eigenvalues[idx]).norm();
    }
    check_residuals(a, res, n)?;
    Ok((eig.eigenvalues[imin], eig.eigenvalues[imax], res))
}

fn argminmax(v: &[f64]) -> (usize, usize) {
    let mut lo = 0;
    let mut hi = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[lo] {
            lo = i;
        }
        if *x > v[hi] {
            hi = i;
        }
    }
    (lo, hi)
}

fn check_residuals(a: &SymToeplitz, res: [f64; 2], steps: usize) -> Result<()> {
    let worst = res[0].max(res[1]);
    if worst > RESIDUAL_TOL * a.norm1() {
        return Err(Error::Lanczos { steps, residual: worst });
    }
    Ok(())
}

/// Deterministic start vector with no symmetry, so it is not orthogonal to
/// either centro-symmetric or skew eigenvectors.
fn start_vector(n: usize) -> Vec<f64> {
    let mut s = 0x9E37_79B9_7F4A_7C15u64;
    let mut v: Vec<f64> = (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            0.5 + (s >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    v
}

/// Lanczos with full reorthogonalization and FFT products. Convergence of
/// both extreme Ritz pairs is checked every few steps through the Ritz
/// residual estimate and confirmed with true residuals.
fn lanczos_extremes(a: &SymToeplitz) -> Result<(f64, f64, [f64; 2])> {
    const CHECK_EVERY: usize = 10;
    let n = a.dim();
    let plan = CirculantPlan::new(a);
    let mut scratch = plan.scratch();
    let tol = RESIDUAL_TOL * a.norm1();
    let mut basis: Vec<Vec<f64>> = vec![start_vector(n)];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let mut last_residual = f64::INFINITY;
    for k in 0..n {
        plan.matvec_with(&basis[k], &mut w, &mut scratch)?;
        let alpha = dot(&w, &basis[k]);
        alphas.push(alpha);
        // two passes of classical Gram-Schmidt against the whole basis
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&w, q);
                w.iter_mut().zip(q).for_each(|(wi, qi)| *wi -= c * qi);
            }
        }
        let beta = norm2(&w);
        let steps = k + 1;
        let exhausted = steps == n || beta <= f64::EPSILON * a.norm1();
        if exhausted || steps % CHECK_EVERY == 0 {
            let tri = Tridiagonal { diag: &alphas, off: &betas };
            let pairs = [tri.extreme(false), tri.extreme(true)].map(|l| (l, tri.eigenvector(l)));
            let converged = pairs.iter().all(|(_, s)| (beta * s[steps - 1]).abs() <= tol);
            if exhausted || converged {
                let mut res = [0.0; 2];
                for (slot, (lambda, s)) in pairs.iter().enumerate() {
                    let mut y = vec![0.0; n];
                    for (q, c) in basis.iter().zip(s) {
                        y.iter_mut().zip(q).for_each(|(yi, qi)| *yi += c * qi);
                    }
                    let cy = plan.matvec(&y)?;
                    let r: Vec<f64> = cy.iter().zip(&y).map(|(p, q)| p - lambda * q).collect();
                    res[slot] = norm2(&r) / norm2(&y);
                }
                last_residual = res[0].max(res[1]);
                if last_residual <= tol {
                    return Ok((pairs[0].0, pairs[1].0, res));
                }
            }
        }
        if exhausted {
            break;
        }
        betas.push(beta);
        basis.push(w.iter().map(|v| v / beta).collect());
    }
    Err(Error::Lanczos { steps: alphas.len(), residual: last_residual })
}

/// Symmetric tridiagonal matrix with `off.len() == diag.len() - 1`.
struct Tridiagonal<'a> {
    diag: &'a [f64],
    off: &'a [f64],
}

impl Tridiagonal<'_> {
    /// Number of eigenvalues strictly below `x` (Sturm sequence).
    fn count_below(&self, x: f64) -> usize {
        let mut count = 0;
        let mut q = 1.0;
        for (i, d) in self.diag.iter().enumerate() {
            q = if i == 0 { d - x } else { d - x - self.off[i - 1] * self.off[i - 1] / q };
            if q == 0.0 {
                q = -f64::MIN_POSITIVE;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    fn radius(&self, i: usize) -> f64 {
        let left = if i > 0 { self.off[i - 1].abs() } else { 0.0 };
        let right = self.off.get(i).map_or(0.0, |v| v.abs());
        left + right
    }

    /// Smallest or largest eigenvalue by bisection inside the Gershgorin interval.
    fn extreme(&self, largest: bool) -> f64 {
        let k = self.diag.len();
        let mut lo = (0..k).map(|i| self.diag[i] - self.radius(i)).fold(f64::INFINITY, f64::min);
        let mut hi = (0..k).map(|i| self.diag[i] + self.radius(i)).fold(f64::NEG_INFINITY, f64::max);
        let pad = f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        lo -= pad;
        hi += pad;
        let target = if largest { k - 1 } else { 0 };
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return mid;
            }
            if self.count_below(mid) > target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    /// Unit eigenvector for an accurate eigenvalue by inverse iteration.
    fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let k = self.diag.len();
        let scale = self.diag.iter().chain(self.off).fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
        let shift = lambda + 64.0 * f64::EPSILON * scale;
        let mut y: Vec<f64> = (0..k).map(|i| 1.0 + 0.1 * ((i * 7 + 3) % 11) as f64).collect();
        for _ in 0..3 {
            y = self.solve_shifted(shift, &y, scale);
            let ny = norm2(&y);
            y.iter_mut().for_each(|v| *v /= ny);
        }
        y
    }

    /// `(T - shift I)^{-1} b` by Gaussian elimination with partial pivoting.
    fn solve_shifted(&self, shift: f64, b: &[f64], scale: f64) -> Vec<f64> {
        let k = self.diag.len();
        let tiny = f64::EPSILON * scale;
        // row i after elimination: d[i] x_i + u1[i] x_{i+1} + u2[i] x_{i+2}
        let mut d: Vec<f64> = self.diag.iter().map(|v| v - shift).collect();
        let mut u1: Vec<f64> = self.off.to_vec();
        u1.push(0.0);
        let mut u2 = vec![0.0; k];
        let mut rhs = b.to_vec();
        for i in 0..k.saturating_sub(1) {
            let sub = self.off[i];
            if sub.abs() > d[i].abs() {
                let next_u1 = u1[i + 1];
                let (di, u1i) = (d[i], u1[i]);
                d[i] = sub;
                u1[i] = d[i + 1];
                u2[i] = next_u1;
                d[i + 1] = u1i;
                u1[i + 1] = 0.0;
                rhs.swap(i, i + 1);
                let m = di / d[i];
                d[i + 1] -= m * u1[i];
                u1[i + 1] -= m * u2[i];
                rhs[i + 1] -= m * rhs[i];
            } else {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let m = sub / d[i];
                d[i + 1] -= m * u1[i];
                rhs[i + 1] -= m * rhs[i];
            }
        }
        if d[k - 1] == 0.0 {
            d[k - 1] = tiny;
        }
        let mut x = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = rhs[i];
            if i + 1 < k {
                s -= u1[i] * x[i + 1];
            }
            if i + 2 < k {
                s -= u2[i] * x[i + 2];
            }
            x[i] = s / d[i];
        }
        x
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub m: usize,
    pub report: SpectralReport,
    /// `kappa(M) / kappa(M/2)`; `None` on the first row or a non-dyadic step.
    pub ratio: Option<f64>,
}

/// Condition numbers over a sequence of `M`; `family(M)` builds the matrix.
pub fn kappa_scaling_study(
    ms: &[usize],
    method: EigMethod,
    mut family: impl FnMut(usize) -> Result<SymToeplitz>,
) -> Result<Vec<ScalingRow>> {
    let mut rows: Vec<ScalingRow> = Vec::with_capacity(ms.len());
    for &m in ms {
        let report = extreme_eigs(&family(m)?, method)?;
        let ratio = rows
            .last()
            .filter(|prev| prev.m * 2 == m)
            .map(|prev| report.kappa / prev.report.kappa);
        rows.push(ScalingRow { m, report, ratio });
    }
    Ok(rows)
}

/// Asymptotic `kappa(M) / kappa(M/2)` for `tau = h^mu`: `2^(2 beta - mu alpha)`,
/// floored at 1 (bounded condition numbers).
pub fn predicted_ratio(alpha: f64, beta: f64, mu: f64) -> f64 {
    2f64.powf((2.0 * beta - mu * alpha).max(0.0))
}
