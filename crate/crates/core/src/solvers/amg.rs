//! Classical (Ruge-Stueben) AMG: strength of connection, first-pass C/F
//! coloring, truncated direct interpolation, Galerkin coarse operators and
//! V-cycles.

use std::cmp::Reverse;
use std::collections::BTreeSet;
use std::time::Instant;

use super::{check_omega, initial_guess, Method, SolveReport};
use crate::dense::{norm2, Cholesky, DenseMatrix};
use crate::error::{Error, Result};
use crate::toeplitz::{lower_inverse_column, CirculantScratch, SymToeplitz, ToeplitzBlock, ToeplitzOperator};

pub const DEFAULT_EPSILON0: f64 = 1e-5;

/// Strength-of-connection tolerance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theta {
    /// `|c_13| / |c_12| + epsilon0` from the finest-level first row.
    Auto { epsilon0: f64 },
    Fixed(f64),
}

impl Default for Theta {
    fn default() -> Self {
        Theta::Auto { epsilon0: DEFAULT_EPSILON0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoother {
    DampedJacobi { omega: f64 },
    /// Lexicographic: forward sweep before the coarse correction, backward after.
    GaussSeidel,
    /// C-points then F-points before the coarse correction, F then C after.
    CfGaussSeidel,
}

/// How products with the finest (Toeplitz) operator are formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FineProducts {
    /// Circulant FFT, O(M log M).
    Fft,
    /// Direct row sums, O(M^2). Residuals are accurate enough to reach
    /// relative tolerances near 1e-12 on the worst-conditioned systems.
    Direct,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmgConfig {
    pub theta: Theta,
    pub nu1: usize,
    pub nu2: usize,
    pub smoother: Smoother,
    /// Levels with at most this many unknowns are solved directly.
    pub coarse_size: usize,
    pub max_levels: usize,
    /// Interpolation entries kept per F-row.
    pub max_interp: usize,
    pub fine_products: FineProducts,
}

impl Default for AmgConfig {
    fn default() -> Self {
        Self {
            theta: Theta::default(),
            nu1: 1,
            nu2: 1,
            smoother: Smoother::CfGaussSeidel,
            coarse_size: 8,
            max_levels: 25,
            max_interp: 3,
            fine_products: FineProducts::Direct,
        }
    }
}

impl AmgConfig {
    pub fn with_theta(mut self, theta: Theta) -> Self {
        self.theta = theta;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.nu1 + self.nu2 == 0 {
            return Err(Error::Config("need nu1 + nu2 >= 1".into()));
        }
        if let Smoother::DampedJacobi { omega } = self.smoother {
            check_omega(omega)?;
        }
        match self.theta {
            Theta::Fixed(t) if !(t > 0.0 && t < 1.0) => {
                return Err(Error::Config(format!("theta must lie in (0,1), got {t}")))
            }
            Theta::Auto { epsilon0 } if !(epsilon0 >= 0.0) => {
                return Err(Error::Config(format!("epsilon0 must be >= 0, got {epsilon0}")))
            }
            _ => {}
        }
        if self.max_levels == 0 || self.max_interp == 0 {
            return Err(Error::Config("max_levels and max_interp must be >= 1".into()));
        }
        Ok(())
    }
}

/// `|c_13| / |c_12| + epsilon0` for a symmetric Toeplitz matrix.
pub fn theta_reference(c: &SymToeplitz, epsilon0: f64) -> Result<f64> {
    if c.dim() < 3 {
        return Err(Error::Domain(format!(
            "theta reference needs dimension >= 3, got {}",
            c.dim()
        )));
    }
    let row = c.first_row();
    Ok(row[2].abs() / row[1].abs() + epsilon0)
}

/// The reference tolerance when it lies in (0,1). Otherwise `|c_12|` is not
/// the largest off-diagonal (mass-dominated rows, small `tau`), and the same
/// rule is applied to the two largest off-diagonal magnitudes instead.
pub fn theta_auto(c: &SymToeplitz, epsilon0: f64) -> Result<f64> {
    let t = theta_reference(c, epsilon0)?;
    if t > 0.0 && t < 1.0 {
        return Ok(t);
    }
    let mut mags: Vec<f64> = c.first_row()[1..].iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    if mags[0] == 0.0 {
        return Err(Error::AmgSetup { level: 0, reason: "operator is diagonal".into() });
    }
    Ok((mags[1] / mags[0] + epsilon0).min(1.0 - f64::EPSILON))
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmgStats {
    pub levels: usize,
    pub dims: Vec<usize>,
    pub grid_complexity: f64,
    pub operator_complexity: f64,
    pub theta: f64,
}

#[derive(Debug, Clone)]
pub enum LevelOperator {
    Toeplitz(ToeplitzOperator, FineProducts),
    Dense(DenseMatrix),
}

impl LevelOperator {
    pub fn dim(&self) -> usize {
        match self {
            LevelOperator::Toeplitz(t, _) => t.dim(),
            LevelOperator::Dense(d) => d.rows(),
        }
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        match self {
            LevelOperator::Toeplitz(t, _) => t.matrix().entry(i, j),
            LevelOperator::Dense(d) => d[(i, j)],
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            LevelOperator::Toeplitz(t, _) => t.matrix().to_dense(),
            LevelOperator::Dense(d) => d.clone(),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            LevelOperator::Toeplitz(t, _) => {
                let n = t.dim();
                t.matrix()
                    .first_row()
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, _)| if k == 0 { n } else { 2 * (n - k) })
                    .sum()
            }
            LevelOperator::Dense(d) => d.nnz(),
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        match self {
            LevelOperator::Toeplitz(t, _) => vec![t.matrix().diagonal(); t.dim()],
            LevelOperator::Dense(d) => d.diagonal(),
        }
    }

    fn apply(&self, x: &[f64], out: &mut [f64], scratch: &mut Option<CirculantScratch>) -> Result<()> {
        match self {
            LevelOperator::Toeplitz(t, FineProducts::Direct) => t.matrix().direct_matvec_into(x, out),
            LevelOperator::Toeplitz(t, FineProducts::Fft) => {
                let s = scratch.get_or_insert_with(|| t.plan().scratch());
                t.apply_with(x, out, s)
            }
            LevelOperator::Dense(d) => {
                for (i, o) in out.iter_mut().enumerate() {
                    *o = crate::dense::dot(d.row(i), x);
                }
                Ok(())
            }
        }
    }

    /// `sum_{j != i} a_ij x_j`.
    #[inline]
    fn off_diagonal_dot(&self, i: usize, x: &[f64]) -> f64 {
        match self {
            LevelOperator::Toeplitz(t, _) => {
                let r = t.matrix().first_row();
                let mut s = 0.0;
                for (j, xj) in x[..i].iter().enumerate() {
                    s += r[i - j] * xj;
                }
                for (d, xj) in x[i + 1..].iter().enumerate() {
                    s += r[d + 1] * xj;
                }
                s
            }
            LevelOperator::Dense(d) => {
                let row = d.row(i);
                crate::dense::dot(&row[..i], &x[..i]) + crate::dense::dot(&row[i + 1..], &x[i + 1..])
            }
        }
    }

    /// Off-diagonal entries of row `i` as `(j, a_ij)`, skipping zeros.
    fn row_off_diagonal(&self, i: usize) -> Vec<(usize, f64)> {
        let n = self.dim();
        (0..n)
            .filter(|&j| j != i)
            .map(|j| (j, self.entry(i, j)))
            .filter(|(_, v)| *v != 0.0)
            .collect()
    }
}

/// Row-sparse interpolation from a coarse level to a fine level.
#[derive(Debug, Clone)]
pub struct Interpolation {
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<(usize, f64)>>,
}

impl Interpolation {
    fn new(rows: Vec<Vec<(usize, f64)>>, coarse_dim: usize) -> Self {
        let mut cols = vec![Vec::new(); coarse_dim];
        for (i, row) in rows.iter().enumerate() {
            for &(c, w) in row {
                cols[c].push((i, w));
            }
        }
        Self { rows, cols }
    }

    pub fn fine_dim(&self) -> usize {
        self.rows.len()
    }

    pub fn coarse_dim(&self) -> usize {
        self.cols.len()
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut p = DenseMatrix::zeros(self.fine_dim(), self.coarse_dim());
        for (i, row) in self.rows.iter().enumerate() {
            for &(c, w) in row {
                p[(i, c)] = w;
            }
        }
        p
    }

    /// `P^T r`.
    pub fn restrict(&self, r: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.coarse_dim()];
        for (row, ri) in self.rows.iter().zip(r) {
            for &(c, w) in row {
                out[c] += w * ri;
            }
        }
        out
    }

    /// `x += P e`.
    pub fn prolong_add(&self, e: &[f64], x: &mut [f64]) {
        for (row, xi) in self.rows.iter().zip(x.iter_mut()) {
            for &(c, w) in row {
                *xi += w * e[c];
            }
        }
    }
}

/// Gauss-Seidel sweeps on a Toeplitz level from a zero start, as triangular
/// Toeplitz solves and block products by FFT. Built only when the splitting
/// (if used) alternates, so every block is itself Toeplitz.
#[derive(Debug, Clone)]
enum FastSweeps {
    /// `(D + L)^{-1}`; the backward sweep is its persymmetric reflection.
    Lexicographic { lower_inv: ToeplitzBlock },
    /// C-points `c0, c0 + 2, ...`, F-points the others.
    Alternating {
        c0: usize,
        cc_inv: ToeplitzBlock,
        ff_inv: ToeplitzBlock,
        cf: ToeplitzBlock,
        fc: ToeplitzBlock,
    },
}

impl FastSweeps {
    fn build(t: &SymToeplitz, smoother: Smoother, coarse: &[bool]) -> Result<Option<Self>> {
        let n = t.dim();
        match smoother {
            Smoother::GaussSeidel => {
                let inv = lower_inverse_column(t.first_row())?;
                Ok(Some(FastSweeps::Lexicographic { lower_inv: ToeplitzBlock::lower(&inv)? }))
            }
            Smoother::CfGaussSeidel => {
                let c0 = if coarse[0] { 0 } else { 1 };
                let alternating = coarse.iter().enumerate().all(|(i, &c)| c == (i % 2 == c0));
                let f0 = 1 - c0;
                let (nc, nf) = ((n + 1 - c0) / 2, (n + 1 - f0) / 2);
                if !alternating || nc == 0 || nf == 0 {
                    return Ok(None);
                }
                // both diagonal blocks have first column t_0, t_2, t_4, ...
                let lower_inv = |len: usize| -> Result<ToeplitzBlock> {
                    let col: Vec<f64> = (0..len).map(|k| t.first_row()[2 * k]).collect();
                    ToeplitzBlock::lower(&lower_inverse_column(&col)?)
                };
                Ok(Some(FastSweeps::Alternating {
                    c0,
                    cc_inv: lower_inv(nc)?,
                    ff_inv: lower_inv(nf)?,
                    cf: ToeplitzBlock::strided(t, c0, nc, f0, nf, 2)?,
                    fc: ToeplitzBlock::strided(t, f0, nf, c0, nc, 2)?,
                }))
            }
            Smoother::DampedJacobi { .. } => Ok(None),
        }
    }

    fn matches(&self, smoother: Smoother) -> bool {
        matches!(
            (self, smoother),
            (FastSweeps::Lexicographic { .. }, Smoother::GaussSeidel)
                | (FastSweeps::Alternating { .. }, Smoother::CfGaussSeidel)
        )
    }

    /// One sweep on `A d = r` from `d = 0`.
    fn sweep(&self, r: &[f64], forward: bool) -> Result<Vec<f64>> {
        match self {
            FastSweeps::Lexicographic { lower_inv } if forward => lower_inv.apply(r),
            FastSweeps::Lexicographic { lower_inv } => {
                let rev: Vec<f64> = r.iter().rev().copied().collect();
                let mut d = lower_inv.apply(&rev)?;
                d.reverse();
                Ok(d)
            }
            FastSweeps::Alternating { c0, cc_inv, ff_inv, cf, fc } => {
                let f0 = 1 - c0;
                let pick = |start: usize| -> Vec<f64> { r.iter().skip(start).step_by(2).copied().collect() };
                let (rc, rf) = (pick(*c0), pick(f0));
                let (dc, df) = if forward {
                    let dc = cc_inv.apply(&rc)?;
                    let coupling = fc.apply(&dc)?;
                    let rhs: Vec<f64> = rf.iter().zip(&coupling).map(|(a, b)| a - b).collect();
                    (dc, ff_inv.apply(&rhs)?)
                } else {
                    let df = ff_inv.apply(&rf)?;
                    let coupling = cf.apply(&df)?;
                    let rhs: Vec<f64> = rc.iter().zip(&coupling).map(|(a, b)| a - b).collect();
                    (cc_inv.apply(&rhs)?, df)
                };
                let mut d = vec![0.0; r.len()];
                d.iter_mut().skip(*c0).step_by(2).zip(&dc).for_each(|(o, v)| *o = *v);
                d.iter_mut().skip(f0).step_by(2).zip(&df).for_each(|(o, v)| *o = *v);
                Ok(d)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Level {
    op: LevelOperator,
    diag: Vec<f64>,
    /// Present on every level except the coarsest.
    transfer: Option<(Vec<bool>, Interpolation)>,
    fast: Option<FastSweeps>,
}

impl Level {
    pub fn operator(&self) -> &LevelOperator {
        &self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// C/F flags (`true` = coarse) and interpolation to this level.
    pub fn splitting(&self) -> Option<&[bool]> {
        self.transfer.as_ref().map(|(s, _)| s.as_slice())
    }

    pub fn interpolation(&self) -> Option<&Interpolation> {
        self.transfer.as_ref().map(|(_, p)| p)
    }
}

#[derive(Debug, Clone)]
pub struct AmgHierarchy {
    levels: Vec<Level>,
    coarse_solver: Cholesky,
    config: AmgConfig,
    theta: f64,
}

/// Strong dependencies `S_i = { j != i : |a_ij| >= theta max_{k != i} |a_ik| }`.
pub fn strength_graph(op: &LevelOperator, theta: f64) -> Vec<Vec<usize>> {
    let n = op.dim();
    match op {
        LevelOperator::Toeplitz(t, _) => {
            let r = t.matrix().first_row();
            // prefix maxima of |r_d| over d = 1..
            let mut pmax = vec![0.0f64; n];
            for d in 1..n {
                pmax[d] = pmax[d - 1].max(r[d].abs());
            }
            (0..n)
                .map(|i| {
                    let reach = i.max(n - 1 - i);
                    let cut = theta * pmax[reach];
                    if pmax[reach] == 0.0 {
                        return Vec::new();
                    }
                    let mut s = Vec::new();
                    for j in 0..n {
                        if j != i && r[i.abs_diff(j)].abs() >= cut && r[i.abs_diff(j)] != 0.0 {
                            s.push(j);
                        }
                    }
                    s
                })
                .collect()
        }
        LevelOperator::Dense(d) => (0..n)
            .map(|i| {
                let row = d.row(i);
                let max = row
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .fold(0.0f64, |m, (_, v)| m.max(v.abs()));
                if max == 0.0 {
                    return Vec::new();
                }
                row.iter()
                    .enumerate()
                    .filter(|(j, v)| *j != i && **v != 0.0 && v.abs() >= theta * max)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect(),
    }
}

/// First-pass Ruge-Stueben coloring; `true` marks C-points.
pub fn rs_coarsening(strong: &[Vec<usize>]) -> Vec<bool> {
    #[derive(Clone, Copy, PartialEq)]
    enum State {
        Undecided,
        Coarse,
        Fine,
    }
    let n = strong.len();
    let mut influences: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, s) in strong.iter().enumerate() {
        for &j in s {
            influences[j].push(i);
        }
    }
    let mut lambda: Vec<usize> = influences.iter().map(Vec::len).collect();
    let mut state = vec![State::Undecided; n];
    let mut queue: BTreeSet<(usize, Reverse<usize>)> =
        (0..n).map(|i| (lambda[i], Reverse(i))).collect();

    fn bump(
        queue: &mut BTreeSet<(usize, Reverse<usize>)>,
        lambda: &mut [usize],
        k: usize,
        up: bool,
    ) {
        queue.remove(&(lambda[k], Reverse(k)));
        if up {
            lambda[k] += 1;
        } else {
            lambda[k] = lambda[k].saturating_sub(1);
        }
        queue.insert((lambda[k], Reverse(k)));
    }

    while let Some((lam, Reverse(i))) = queue.pop_last() {
        if lam == 0 {
            // nothing left depends on these points; keep them coarse
            state[i] = State::Coarse;
            for (_, Reverse(k)) in std::mem::take(&mut queue) {
                state[k] = State::Coarse;
            }
            break;
        }
        state[i] = State::Coarse;
        for &j in &influences[i] {
            if state[j] != State::Undecided {
                continue;
            }
            queue.remove(&(lambda[j], Reverse(j)));
            state[j] = State::Fine;
            for &k in &strong[j] {
                if state[k] == State::Undecided {
                    bump(&mut queue, &mut lambda, k, true);
                }
            }
        }
        for &k in &strong[i] {
            if state[k] == State::Undecided {
                bump(&mut queue, &mut lambda, k, false);
            }
        }
    }
    state.into_iter().map(|s| s == State::Coarse).collect()
}

/// Direct interpolation from strong C-neighbours, truncated to `max_interp`
/// entries per row with the row sum preserved.
pub fn direct_interpolation(
    op: &LevelOperator,
    strong: &[Vec<usize>],
    coarse: &[bool],
    max_interp: usize,
    level: usize,
) -> Result<Interpolation> {
    let n = op.dim();
    let mut coarse_index = vec![usize::MAX; n];
    let mut nc = 0;
    for i in 0..n {
        if coarse[i] {
            coarse_index[i] = nc;
            nc += 1;
        }
    }
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        if coarse[i] {
            rows.push(vec![(coarse_index[i], 1.0)]);
            continue;
        }
        let aii = op.entry(i, i);
        let neighbour_sum: f64 = op.row_off_diagonal(i).iter().map(|(_, v)| v).sum();
        let ci: Vec<(usize, f64)> = strong[i]
            .iter()
            .filter(|&&j| coarse[j])
            .map(|&j| (j, op.entry(i, j)))
            .collect();
        let coarse_sum: f64 = ci.iter().map(|(_, v)| v).sum();
        if ci.is_empty() || coarse_sum == 0.0 {
            return Err(Error::AmgSetup {
                level,
                reason: format!("F-point {i} has no strong C-neighbour (theta too large?)"),
            });
        }
        let scale = -neighbour_sum / (aii * coarse_sum);
        let mut weights: Vec<(usize, f64)> = ci.iter().map(|&(j, a)| (j, scale * a)).collect();
        if weights.len() > max_interp {
            let total: f64 = weights.iter().map(|(_, w)| w).sum();
            weights.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()).then(a.0.cmp(&b.0)));
            weights.truncate(max_interp);
            let kept: f64 = weights.iter().map(|(_, w)| w).sum();
            let fix = total / kept;
            weights.iter_mut().for_each(|(_, w)| *w *= fix);
            weights.sort_by_key(|(j, _)| *j);
        }
        rows.push(weights.into_iter().map(|(j, w)| (coarse_index[j], w)).collect());
    }
    Ok(Interpolation::new(rows, nc))
}

/// `P^T A P` as a dense matrix.
pub fn galerkin(op: &LevelOperator, p: &Interpolation) -> DenseMatrix {
    let nc = p.coarse_dim();
    let mut ac = DenseMatrix::zeros(nc, nc);
    for c1 in 0..nc {
        for c2 in c1..nc {
            let mut s = 0.0;
            for &(i, w1) in &p.cols[c1] {
                for &(j, w2) in &p.cols[c2] {
                    s += w1 * w2 * op.entry(i, j);
                }
            }
            ac[(c1, c2)] = s;
            ac[(c2, c1)] = s;
        }
    }
    ac
}

/// Builds the hierarchy for `a` with the tolerance and limits in `config`.
pub fn amg_setup(a: &ToeplitzOperator, config: &AmgConfig) -> Result<AmgHierarchy> {
    config.validate()?;
    let theta = match config.theta {
        Theta::Fixed(t) => t,
        Theta::Auto { epsilon0 } => theta_auto(a.matrix(), epsilon0)?,
    };
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::AmgSetup { level: 0, reason: format!("theta {theta} outside (0,1)") });
    }
    let mut levels = Vec::new();
    let mut op = LevelOperator::Toeplitz(a.clone(), config.fine_products);
    loop {
        let n = op.dim();
        let last = n <= config.coarse_size || levels.len() + 1 >= config.max_levels;
        if last {
            let coarse_solver = op.to_dense().cholesky().map_err(|e| Error::AmgSetup {
                level: levels.len(),
                reason: format!("coarsest operator: {e}"),
            })?;
            let diag = op.diagonal();
            levels.push(Level { op, diag, transfer: None, fast: None });
            return Ok(AmgHierarchy { levels, coarse_solver, config: config.clone(), theta });
        }
        let level = levels.len();
        let strong = strength_graph(&op, theta);
        let coarse = rs_coarsening(&strong);
        let p = direct_interpolation(&op, &strong, &coarse, config.max_interp, level)?;
        if p.coarse_dim() == 0 || p.coarse_dim() >= n {
            return Err(Error::AmgSetup {
                level,
                reason: format!("coarsening stalled ({} of {n} points coarse)", p.coarse_dim()),
            });
        }
        let next = LevelOperator::Dense(galerkin(&op, &p));
        let diag = op.diagonal();
        let fast = match &op {
            LevelOperator::Toeplitz(t, _) => FastSweeps::build(t.matrix(), config.smoother, &coarse)?,
            LevelOperator::Dense(_) => None,
        };
        levels.push(Level { op, diag, transfer: Some((coarse, p)), fast });
        op = next;
    }
}

impl AmgHierarchy {
    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn config(&self) -> &AmgConfig {
        &self.config
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn dim(&self) -> usize {
        self.levels[0].dim()
    }

    pub fn stats(&self) -> AmgStats {
        let dims: Vec<usize> = self.levels.iter().map(Level::dim).collect();
        let nnz: Vec<usize> = self.levels.iter().map(|l| l.op.nnz()).collect();
        AmgStats {
            levels: dims.len(),
            grid_complexity: dims.iter().sum::<usize>() as f64 / dims[0] as f64,
            operator_complexity: nnz.iter().sum::<usize>() as f64 / nnz[0] as f64,
            dims,
            theta: self.theta,
        }
    }

    /// One V-cycle with the configured smoothing.
    pub fn v_cycle(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        let c = &self.config;
        self.v_cycle_with(b, x, c.nu1, c.nu2, c.smoother)
    }

    pub fn v_cycle_with(
        &self,
        b: &[f64],
        x: &mut [f64],
        nu1: usize,
        nu2: usize,
        smoother: Smoother,
    ) -> Result<()> {
        if b.len() != self.dim() || x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: b.len().min(x.len()) });
        }
        let mut r = self.residual(b, x)?;
        self.top_cycle(b, x, &mut r, nu1, nu2, smoother).map(|_| ())
    }

    /// V-cycle on the finest level, given `r = b - A x`. Every smoothing step
    /// and the coarse correction solve for a correction `d` from the current
    /// residual; `x += d` and `r -= A d` by FFT, so the long Toeplitz rows
    /// never multiply the iterate itself. Returns `sum ||d||_2`, which bounds
    /// the drift of the updated `r` in units of the FFT product error.
    fn top_cycle(
        &self,
        b: &[f64],
        x: &mut [f64],
        r: &mut [f64],
        nu1: usize,
        nu2: usize,
        smoother: Smoother,
    ) -> Result<f64> {
        let level = &self.levels[0];
        let (LevelOperator::Toeplitz(t, _), Some((_, p))) = (&level.op, &level.transfer) else {
            self.cycle(0, b, x, nu1, nu2, smoother)?;
            r.copy_from_slice(&self.residual(b, x)?);
            return Ok(0.0);
        };
        let mut scratch = t.plan().scratch();
        let mut ad = vec![0.0; x.len()];
        let mut moved = 0.0;
        let mut update = |d: &[f64], x: &mut [f64], r: &mut [f64]| -> Result<()> {
            x.iter_mut().zip(d).for_each(|(xi, di)| *xi += di);
            t.apply_with(d, &mut ad, &mut scratch)?;
            r.iter_mut().zip(&ad).for_each(|(ri, ai)| *ri -= ai);
            moved += norm2(d);
            Ok(())
        };
        for _ in 0..nu1 {
            let d = correction(level, r, smoother, true)?;
            update(&d, x, r)?;
        }
        let rc = p.restrict(r);
        let mut ec = vec![0.0; p.coarse_dim()];
        self.cycle(1, &rc, &mut ec, nu1, nu2, smoother)?;
        let mut e = vec![0.0; x.len()];
        p.prolong_add(&ec, &mut e);
        update(&e, x, r)?;
        for _ in 0..nu2 {
            let d = correction(level, r, smoother, false)?;
            update(&d, x, r)?;
        }
        Ok(moved)
    }

    /// V-cycle on a Galerkin level (or a finest level that is also the coarsest).
    fn cycle(
        &self,
        l: usize,
        b: &[f64],
        x: &mut [f64],
        nu1: usize,
        nu2: usize,
        smoother: Smoother,
    ) -> Result<()> {
        let level = &self.levels[l];
        let Some((_, p)) = &level.transfer else {
            let sol = self.coarse_solver.solve(b);
            x.copy_from_slice(&sol);
            return Ok(());
        };
        let mut scratch = None;
        for _ in 0..nu1 {
            smooth(level, b, x, smoother, true, &mut scratch)?;
        }
        let mut ax = vec![0.0; level.dim()];
        level.op.apply(x, &mut ax, &mut scratch)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let rc = p.restrict(&r);
        let mut ec = vec![0.0; p.coarse_dim()];
        self.cycle(l + 1, &rc, &mut ec, nu1, nu2, smoother)?;
        p.prolong_add(&ec, x);
        for _ in 0..nu2 {
            smooth(level, b, x, smoother, false, &mut scratch)?;
        }
        Ok(())
    }

    pub fn residual(&self, b: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        let mut ax = vec![0.0; self.dim()];
        self.levels[0].op.apply(x, &mut ax, &mut None)?;
        Ok(b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect())
    }
}

/// Smoother step for `A d = r` from `d = 0`.
fn correction(level: &Level, r: &[f64], smoother: Smoother, forward: bool) -> Result<Vec<f64>> {
    match smoother {
        Smoother::DampedJacobi { omega } => {
            Ok(r.iter().zip(&level.diag).map(|(ri, di)| omega * ri / di).collect())
        }
        Smoother::GaussSeidel | Smoother::CfGaussSeidel => match &level.fast {
            Some(fast) if fast.matches(smoother) => fast.sweep(r, forward),
            _ => {
                let mut d = vec![0.0; r.len()];
                gauss_seidel(level, r, &mut d, smoother, forward);
                Ok(d)
            }
        },
    }
}

/// In-place smoothing of `A x = b` on a level.
fn smooth(
    level: &Level,
    b: &[f64],
    x: &mut [f64],
    smoother: Smoother,
    forward: bool,
    scratch: &mut Option<CirculantScratch>,
) -> Result<()> {
    match smoother {
        Smoother::DampedJacobi { omega } => {
            let mut ax = vec![0.0; x.len()];
            level.op.apply(x, &mut ax, scratch)?;
            for i in 0..x.len() {
                x[i] += omega * (b[i] - ax[i]) / level.diag[i];
            }
        }
        Smoother::GaussSeidel | Smoother::CfGaussSeidel => gauss_seidel(level, b, x, smoother, forward),
    }
    Ok(())
}

fn gauss_seidel(level: &Level, b: &[f64], x: &mut [f64], smoother: Smoother, forward: bool) {
    let n = x.len();
    let sweep = |i: usize, x: &mut [f64]| {
        x[i] = (b[i] - level.op.off_diagonal_dot(i, x)) / level.diag[i];
    };
    match (smoother, level.splitting()) {
        (Smoother::CfGaussSeidel, Some(split)) => {
            for coarse in [forward, !forward] {
                (0..n).filter(|&i| split[i] == coarse).for_each(|i| sweep(i, x));
            }
        }
        _ if forward => (0..n).for_each(|i| sweep(i, x)),
        _ => (0..n).rev().for_each(|i| sweep(i, x)),
    }
}

/// Updated residuals are recomputed exactly once their drift bound exceeds
/// this fraction of their norm.
const DRIFT_FRACTION: f64 = 1e-2;

/// Error of one FFT product per unit `||d||_2`: a generous multiple of
/// `u log2(N) ||T||_1`.
fn fft_error_factor(h: &AmgHierarchy) -> f64 {
    match &h.levels[0].op {
        LevelOperator::Toeplitz(t, _) => {
            let size = t.plan().size() as f64;
            8.0 * f64::EPSILON * size.log2().max(1.0) * t.matrix().norm1()
        }
        LevelOperator::Dense(_) => 0.0,
    }
}

/// Repeats V-cycles until `||b - A x|| <= tol ||b||`.
pub fn amg_solve(
    h: &AmgHierarchy,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let (mut x, bnorm) = initial_guess(h.dim(), b, x0)?;
    let mut report = SolveReport::start(Method::Amg);
    report.amg = Some(h.stats());
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        report.converged = true;
        report.residual_history.push(0.0);
        report.wall_time = start.elapsed();
        return Ok((x, report));
    }
    let c = h.config();
    let drift_per_unit = fft_error_factor(h);
    let mut r = h.residual(b, &x)?;
    // bound on ||r - (b - A x)|| accumulated by FFT residual updates
    let mut drift = 0.0;
    loop {
        let mut rnorm = norm2(&r);
        let stopping = rnorm <= tol * bnorm || report.iterations >= max_iters;
        if drift > 0.0 && (stopping || drift > DRIFT_FRACTION * rnorm) {
            r = h.residual(b, &x)?;
            drift = 0.0;
            rnorm = norm2(&r);
        }
        let rel = rnorm / bnorm;
        report.residual_history.push(rel);
        if rel <= tol {
            report.converged = true;
            break;
        }
        if report.iterations >= max_iters || !rel.is_finite() {
            break;
        }
        drift += drift_per_unit * h.top_cycle(b, &mut x, &mut r, c.nu1, c.nu2, c.smoother)?;
        report.iterations += 1;
    }
    report.wall_time = start.elapsed();
    Ok((x, report))
}
