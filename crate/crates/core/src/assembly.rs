//! Discrete operators and right-hand sides of the fully discrete scheme
//! (piecewise-linear in space and time, tested against piecewise constants
//! in time).

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::problem::{check_beta, check_orders, ProblemSpec};
use crate::quadrature::{gauss_legendre, mapped};
use crate::special::gamma;
use crate::timegrid::TimeGrid;
use crate::toeplitz::SymToeplitz;

/// Gauss points per space element for source and error integrals.
pub const SPACE_QUAD_POINTS: usize = 4;
/// Gauss points per time subinterval for source integrals.
pub const TIME_QUAD_POINTS: usize = 3;

/// Offsets at or beyond this use the asymptotic series for the fourth
/// difference instead of the five-term formula.
const SERIES_FROM: usize = 3;

/// Interior nodal values `U^0 .. U^{n-1}`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StateHistory {
    states: Vec<Vec<f64>>,
}

impl StateHistory {
    pub fn new(initial: Vec<f64>) -> Self {
        Self { states: vec![initial] }
    }

    pub fn push(&mut self, state: Vec<f64>) -> Result<()> {
        let dim = self.dim();
        if state.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: state.len() });
        }
        self.states.push(state);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    /// Number of stored states (`n` for `U^0 .. U^{n-1}`).
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k]
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().expect("history is never empty")
    }

    pub fn states(&self) -> &[Vec<f64>] {
        &self.states
    }
}

fn riesz_scale(beta: f64, h: f64) -> f64 {
    h.powf(1.0 - 2.0 * beta) / (2.0 * (beta * PI).cos() * gamma(4.0 - 2.0 * beta))
}

/// Fourth central difference of `x^p` at integer `l >= 2`:
/// `(l+2)^p - 4(l+1)^p + 6 l^p - 4(l-1)^p + (l-2)^p`.
pub(crate) fn fourth_difference(p: f64, l: usize) -> f64 {
    debug_assert!(l >= 2);
    let lf = l as f64;
    if l < SERIES_FROM {
        let terms = [
            (lf + 2.0).powf(p),
            -4.0 * (lf + 1.0).powf(p),
            6.0 * lf.powf(p),
            -4.0 * (lf - 1.0).powf(p),
            (lf - 2.0).powf(p),
        ];
        return neumaier_sum(terms);
    }
    // Taylor expansion about l: sum over even k >= 4 of
    // (2^{k+1} - 8) binom(p, k) l^{p-k}; every term is positive for p in (1,2).
    let lp = lf.powf(p);
    let inv = 1.0 / lf;
    let mut binom = p * (p - 1.0) * (p - 2.0) * (p - 3.0) / 24.0;
    let mut two_over = (2.0 * inv).powi(4);
    let mut one_over = inv.powi(4);
    let mut sum = 0.0;
    let mut k = 4.0;
    for _ in 0..400 {
        let term = binom * (2.0 * two_over - 8.0 * one_over);
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        binom *= (p - k) * (p - k - 1.0) / ((k + 1.0) * (k + 2.0));
        two_over *= 4.0 * inv * inv;
        one_over *= inv * inv;
        k += 2.0;
    }
    lp * sum
}

fn neumaier_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Stiffness matrix of the Riesz operator on a uniform mesh with `cells` cells.
pub fn stiffness(beta: f64, cells: usize, h: f64) -> Result<SymToeplitz> {
    check_beta(beta)?;
    check_cells(cells, h)?;
    let dim = cells - 1;
    let scale = riesz_scale(beta, h);
    let p = 3.0 - 2.0 * beta;
    let mut row = Vec::with_capacity(dim);
    row.push(scale * (2f64.powf(4.0 - 2.0 * beta) - 8.0));
    if dim > 1 {
        row.push(scale * (3f64.powf(p) - 2f64.powf(5.0 - 2.0 * beta) + 7.0));
    }
    for l in 2..dim {
        row.push(scale * fourth_difference(p, l));
    }
    SymToeplitz::new(row)
}

/// Consistent mass matrix `h/6 * tridiag(1, 4, 1)`.
pub fn mass(cells: usize, h: f64) -> Result<SymToeplitz> {
    check_cells(cells, h)?;
    let dim = cells - 1;
    let mut row = vec![0.0; dim];
    row[0] = 4.0 * h / 6.0;
    if dim > 1 {
        row[1] = h / 6.0;
    }
    SymToeplitz::new(row)
}

fn check_cells(cells: usize, h: f64) -> Result<()> {
    if cells < 2 {
        return Err(Error::Domain(format!("need at least 2 cells, got {cells}")));
    }
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::Domain(format!("mesh size must be positive, got {h}")));
    }
    Ok(())
}

/// `Gamma(3 - alpha) / 2 * tau^alpha`, the weight of the stiffness matrix.
pub fn stiffness_weight(alpha: f64, tau: f64) -> f64 {
    0.5 * gamma(3.0 - alpha) * tau.powf(alpha)
}

/// `C = M + Gamma(3-alpha)/2 tau^alpha A`.
pub fn coefficient_matrix(
    alpha: f64,
    tau: f64,
    mass: &SymToeplitz,
    stiff: &SymToeplitz,
) -> Result<SymToeplitz> {
    if !(tau > 0.0) {
        return Err(Error::Domain(format!("time step must be positive, got {tau}")));
    }
    mass.add_scaled(stiffness_weight(alpha, tau), stiff)
}

/// `M - Gamma(3-alpha)/2 tau^alpha A`, applied to the previous state.
pub fn explicit_matrix(
    alpha: f64,
    tau: f64,
    mass: &SymToeplitz,
    stiff: &SymToeplitz,
) -> Result<SymToeplitz> {
    mass.add_scaled(-stiffness_weight(alpha, tau), stiff)
}

/// Memory weights for step `n`: entry `k-1` multiplies `M (U^k - U^{k-1})`
/// for `k = 1 .. n-1` (subtracted in the right-hand side).
pub fn history_weights(grid: &TimeGrid, n: usize, alpha: f64) -> Result<Vec<f64>> {
    if n == 0 || n > grid.steps() {
        return Err(Error::OutOfRange { index: n, lo: 1, hi: grid.steps() });
    }
    let p = 2.0 - alpha;
    let tn = grid.t(n);
    let tn1 = grid.t(n - 1);
    let lead = grid.tau(n).powf(alpha - 1.0);
    Ok((1..n)
        .map(|k| {
            let tk = grid.t(k);
            let tk1 = grid.t(k - 1);
            let d = neumaier_sum([
                (tn - tk1).powf(p),
                -(tn1 - tk1).powf(p),
                -(tn - tk).powf(p),
                (tn1 - tk).powf(p),
            ]);
            lead * d / grid.tau(k)
        })
        .collect())
}

/// `f^n_l = int_{I_n} int_Omega f(x,t) phi_l(x) dx dt` by tensor Gauss rules.
pub fn source_vector(spec: &ProblemSpec, n: usize) -> Result<Vec<f64>> {
    if n == 0 || n > spec.grid.steps() {
        return Err(Error::OutOfRange { index: n, lo: 1, hi: spec.grid.steps() });
    }
    let (xs, xw) = gauss_legendre(SPACE_QUAD_POINTS);
    let (ts, tw) = gauss_legendre(TIME_QUAD_POINTS);
    let h = spec.h();
    let dim = spec.dim();
    let (t0, t1) = (spec.grid.t(n - 1), spec.grid.t(n));
    let mut out = vec![0.0; dim];
    for e in 0..spec.cells {
        let xl = spec.a + e as f64 * h;
        let xr = xl + h;
        for (x, wx) in mapped(&xs, &xw, xl, xr) {
            let mut ft = 0.0;
            for (t, wt) in mapped(&ts, &tw, t0, t1) {
                ft += wt * (spec.source)(x, t);
            }
            let v = wx * ft;
            // hat of node e decreases on this element, hat of node e+1 increases
            if e >= 1 {
                out[e - 1] += v * (xr - x) / h;
            }
            if e + 1 < spec.cells {
                out[e] += v * (x - xl) / h;
            }
        }
    }
    Ok(out)
}

/// Weighted memory sum `sum_k w_k (U^k - U^{k-1})` (before the mass matrix).
pub(crate) fn history_sum(weights: &[f64], hist: &StateHistory) -> Vec<f64> {
    let dim = hist.dim();
    let mut acc = vec![0.0; dim];
    for (k, w) in weights.iter().enumerate() {
        let (cur, prev) = (hist.state(k + 1), hist.state(k));
        for i in 0..dim {
            acc[i] += w * (cur[i] - prev[i]);
        }
    }
    acc
}

/// Right-hand side `G^n` for step `n` given `U^0 .. U^{n-1}`.
pub fn assemble_rhs(
    spec: &ProblemSpec,
    n: usize,
    hist: &StateHistory,
    mass: &SymToeplitz,
    stiff: &SymToeplitz,
) -> Result<Vec<f64>> {
    if hist.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: hist.len() });
    }
    if mass.dim() != hist.dim() || stiff.dim() != hist.dim() {
        return Err(Error::DimensionMismatch { expected: hist.dim(), got: mass.dim() });
    }
    let tau = spec.grid.tau(n);
    let f = source_vector(spec, n)?;
    let weights = history_weights(&spec.grid, n, spec.alpha)?;
    let explicit = explicit_matrix(spec.alpha, tau, mass, stiff)?;
    let prev = explicit.plan().matvec(hist.last())?;
    let memory = mass.plan().matvec(&history_sum(&weights, hist))?;
    let c = gamma(3.0 - spec.alpha) * tau.powf(spec.alpha - 1.0);
    Ok((0..hist.dim()).map(|i| c * f[i] + prev[i] - memory[i]).collect())
}

/// `||u(., T) - u_h||_{L^2}` with the default rule.
pub fn l2_error(spec: &ProblemSpec, u_final: &[f64]) -> Result<f64> {
    l2_error_with(spec, u_final, SPACE_QUAD_POINTS)
}

/// L2 error of the piecewise-linear interpolant of `u_final` at `t = T`
/// using `points` Gauss points per element.
pub fn l2_error_with(spec: &ProblemSpec, u_final: &[f64], points: usize) -> Result<f64> {
    let exact = spec.exact.as_ref().ok_or(Error::MissingExact)?;
    if u_final.len() != spec.dim() {
        return Err(Error::DimensionMismatch { expected: spec.dim(), got: u_final.len() });
    }
    let (xs, xw) = gauss_legendre(points);
    let h = spec.h();
    let t = spec.final_time();
    let nodal = |i: usize| if i == 0 || i == spec.cells { 0.0 } else { u_final[i - 1] };
    let mut sum = 0.0;
    for e in 0..spec.cells {
        let xl = spec.a + e as f64 * h;
        let (ul, ur) = (nodal(e), nodal(e + 1));
        for (x, w) in mapped(&xs, &xw, xl, xl + h) {
            let uh = ul + (ur - ul) * (x - xl) / h;
            let d = exact(x, t) - uh;
            sum += w * d * d;
        }
    }
    Ok(sum.sqrt())
}

/// Right side of the M-matrix condition `tau^alpha / h^{2 beta} > threshold`.
pub fn m_matrix_threshold(alpha: f64, beta: f64) -> f64 {
    let b2 = 2.0 * beta;
    -2.0 * (beta * PI).cos() * gamma(4.0 - b2)
        / (3.0 * gamma(3.0 - alpha) * (3f64.powf(3.0 - b2) - 2f64.powf(5.0 - b2) + 7.0))
}

/// Whether the coefficient matrix is an M-matrix (strict inequality).
pub fn is_m_matrix_condition(alpha: f64, beta: f64, tau: f64, h: f64) -> bool {
    if check_orders(alpha, beta).is_err() || !(tau > 0.0) || !(h > 0.0) {
        return false;
    }
    tau.powf(alpha) / h.powf(2.0 * beta) > m_matrix_threshold(alpha, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn stiffness_diagonal_high_precision() {
        // beta = 0.8: coefficient of h^{-0.6} from a 40-digit evaluation
        let h = 1.0 / 8.0;
        let a = stiffness(0.8, 8, h).unwrap();
        let coef = a.first_row()[0] / h.powf(-0.6);
        assert!(close(coef, 1.354_299_209_132_736, 1e-13), "{coef}");
        let off = a.first_row()[1] / h.powf(-0.6);
        assert!(close(off, -0.547_036_485_735_097_6, 1e-13), "{off}");
    }

    #[test]
    fn stiffness_far_entries_high_precision() {
        // 40-digit reference values of the unscaled-by-h entries, beta = 0.8 and 0.6
        let cases = [
            (0.8, 2, -0.087_743_164_453_698_33),
            (0.8, 3, -0.018_811_500_569_899_84),
            (0.8, 10, -0.000_682_567_097_379_772_9),
            (0.8, 100, -1.687_946_084_308_562e-6),
            (0.8, 1000, -4.239_274_026_050_991e-9),
            (0.8, 4000, -1.153_280_310_619_66e-10),
            (0.6, 2, -0.116_056_890_963_620_4),
            (0.6, 50, -6.104_219_020_983_29e-5),
            (0.6, 2000, -1.823_452_017_136_589e-8),
        ];
        for (beta, l, expect) in cases {
            let a = stiffness(beta, l + 2, 1.0).unwrap();
            assert!(close(a.first_row()[l], expect, 1e-12), "beta={beta} l={l}");
        }
    }

    #[test]
    fn smallest_grid_is_single_positive_entry() {
        for beta in [0.55, 0.8, 0.99] {
            let a = stiffness(beta, 2, 0.5).unwrap();
            assert_eq!(a.dim(), 1);
            assert!(a.first_row()[0] > 0.0);
        }
        let m = mass(2, 0.5).unwrap();
        assert_eq!(m.first_row(), &[4.0 * 0.5 / 6.0]);
    }

    #[test]
    fn off_diagonals_negative() {
        for beta in [0.51, 0.6, 0.75, 0.9, 0.999] {
            let a = stiffness(beta, 300, 1.0 / 300.0).unwrap();
            assert!(a.first_row()[0] > 0.0);
            assert!(a.first_row()[1..].iter().all(|v| *v < 0.0), "beta={beta}");
        }
    }

    #[test]
    fn stiffness_rejects_bad_beta() {
        assert!(stiffness(0.5, 8, 0.125).is_err());
        assert!(stiffness(1.0, 8, 0.125).is_err());
        assert!(stiffness(0.8, 1, 1.0).is_err());
    }

    #[test]
    fn mass_matrix_entries() {
        let m = mass(3, 1.0 / 3.0).unwrap().to_dense();
        assert!(close(m[(0, 0)], 4.0 / 18.0, 1e-15));
        assert!(close(m[(0, 1)], 1.0 / 18.0, 1e-15));
        let m = mass(10, 0.1).unwrap();
        let row3: f64 = (0..9).map(|j| m.entry(3, j)).sum();
        assert!(close(row3, 0.1, 1e-14));
    }

    #[test]
    fn coefficient_matrix_limits() {
        let h = 1.0 / 8.0;
        let m = mass(8, h).unwrap();
        let a = stiffness(0.6, 8, h).unwrap();
        let c = coefficient_matrix(0.5, 1e-300, &m, &a).unwrap();
        for (x, y) in c.first_row().iter().zip(m.first_row()) {
            assert!((x - y).abs() < 1e-100);
        }
        let c = coefficient_matrix(0.99, h, &m, &a).unwrap().to_dense();
        let w = stiffness_weight(0.99, h);
        assert_eq!(c[(0, 2)], w * a.first_row()[2]);
        assert!(c.is_symmetric());
        let short = mass(5, 0.2).unwrap();
        assert!(matches!(
            coefficient_matrix(0.5, 0.1, &short, &a),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(coefficient_matrix(0.5, 0.0, &m, &a).is_err());
    }

    #[test]
    fn history_weight_two_steps_uniform() {
        let tau: f64 = 0.125;
        let alpha = 0.4;
        let g = TimeGrid::uniform(1.0, 8).unwrap();
        let w = history_weights(&g, 2, alpha).unwrap();
        let p = 2.0 - alpha;
        let expect = tau.powf(alpha - 1.0) * ((2.0 * tau).powf(p) - 2.0 * tau.powf(p)) / tau;
        assert_eq!(w.len(), 1);
        assert!(close(w[0], expect, 1e-13));
        assert!(history_weights(&g, 1, alpha).unwrap().is_empty());
        assert!(history_weights(&g, 0, alpha).is_err());
        assert!(history_weights(&g, 9, alpha).is_err());
    }

    #[test]
    fn history_weights_vanish_as_alpha_tends_to_one() {
        let g = TimeGrid::uniform(1.0, 16).unwrap();
        let alpha = 1.0 - 1e-8;
        let w = history_weights(&g, 16, alpha).unwrap();
        // for s^{1+eps} the second difference is O(eps) except next to the kink at 0
        for (k, v) in w.iter().enumerate().take(14) {
            assert!(v.abs() < 1e-7, "k={} w={v}", k + 1);
        }
    }

    #[test]
    fn constant_source_integrates_to_h_tau() {
        let g = TimeGrid::uniform(0.5, 4).unwrap();
        let mut spec = ProblemSpec::homogeneous(0.5, 0.7, 10, g).unwrap();
        spec.source = Arc::new(|_, _| 1.0);
        let f = source_vector(&spec, 2).unwrap();
        for v in f {
            assert!(close(v, 0.1 * 0.125, 1e-13));
        }
    }

    #[test]
    fn linear_source_matches_hand_integral() {
        // int x phi_l dx = h x_l for interior hats on a uniform mesh
        let g = TimeGrid::uniform(1.0, 2).unwrap();
        let mut spec = ProblemSpec::homogeneous(0.5, 0.7, 5, g).unwrap();
        spec.source = Arc::new(|x, _| x);
        let f = source_vector(&spec, 1).unwrap();
        for (i, v) in f.iter().enumerate() {
            let xl = 0.2 * (i + 1) as f64;
            assert!((v - 0.2 * xl * 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn first_step_rhs_has_no_memory() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let mut spec = ProblemSpec::manufactured(0.3, 0.7, 6, g).unwrap();
        spec.initial = Arc::new(|x| x * (1.0 - x));
        let h = spec.h();
        let m = mass(6, h).unwrap();
        let a = stiffness(0.7, 6, h).unwrap();
        let hist = StateHistory::new(spec.initial_state());
        let rhs = assemble_rhs(&spec, 1, &hist, &m, &a).unwrap();
        let tau = 0.25;
        let f = source_vector(&spec, 1).unwrap();
        let e = explicit_matrix(0.3, tau, &m, &a).unwrap().dense_matvec(hist.last());
        let c = gamma(2.7) * tau.powf(-0.7);
        for i in 0..5 {
            assert!((rhs[i] - (c * f[i] + e[i])).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_data_gives_zero_rhs() {
        let g = TimeGrid::uniform(1.0, 4).unwrap();
        let spec = ProblemSpec::homogeneous(0.3, 0.7, 6, g).unwrap();
        let h = spec.h();
        let m = mass(6, h).unwrap();
        let a = stiffness(0.7, 6, h).unwrap();
        let mut hist = StateHistory::new(spec.initial_state());
        hist.push(vec![0.0; 5]).unwrap();
        hist.push(vec![0.0; 5]).unwrap();
        let rhs = assemble_rhs(&spec, 3, &hist, &m, &a).unwrap();
        assert!(rhs.iter().all(|v| *v == 0.0));
        assert!(assemble_rhs(&spec, 2, &hist, &m, &a).is_err());
    }

    #[test]
    fn l2_error_of_linear_interpolant() {
        // a hat-representable function has zero interpolation error
        let g = TimeGrid::uniform(1.0, 1).unwrap();
        let mut spec = ProblemSpec::homogeneous(0.5, 0.7, 4, g).unwrap();
        spec.exact = Some(Arc::new(|x, _| if x <= 0.5 { x } else { 1.0 - x }));
        let e = l2_error(&spec, &[0.25, 0.5, 0.25]).unwrap();
        assert!(e < 1e-15);
        spec.exact = None;
        assert!(matches!(l2_error(&spec, &[0.0; 3]), Err(Error::MissingExact)));
    }

    #[test]
    fn m_matrix_predicate() {
        let (alpha, beta) = (0.5, 0.8);
        let thr = m_matrix_threshold(alpha, beta);
        assert!(thr > 0.0);
        // tau fixed, h -> 0 makes the left side blow up
        assert!(is_m_matrix_condition(alpha, beta, 1.0 / 32.0, 1e-4));
        // equality is excluded: pick tau so that tau^alpha = thr with h = 1
        let tau = thr.powf(1.0 / alpha);
        let lhs = tau.powf(alpha);
        if lhs == thr {
            assert!(!is_m_matrix_condition(alpha, beta, tau, 1.0));
        }
        assert!(!is_m_matrix_condition(alpha, beta, tau * 0.5, 1.0));
        assert!(!is_m_matrix_condition(1.2, beta, 0.1, 0.1));
    }
}
