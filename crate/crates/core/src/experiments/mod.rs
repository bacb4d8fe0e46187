//! Parameter studies over the manufactured model problem: convergence, conditioning,
//! solver comparisons, strength-threshold sweeps and step-size schedules.

pub mod fixtures;
mod runners;
pub mod table;

use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::problem::check_orders;
use crate::solvers::{AmgConfig, SwitchRule, DEFAULT_MAX_ITERS, DEFAULT_TOL};
use crate::spectral::EigMethod;

pub use runners::{empirical_threshold, representative_rhs, representative_step, run};
pub use table::{emit, parse_csv, render, sci, Cell, Format, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Convergence,
    Conditioning,
    SolverCompare,
    ThetaSweep,
    AdaptiveSchedule,
    RatioPlot,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Convergence,
        Experiment::Conditioning,
        Experiment::SolverCompare,
        Experiment::ThetaSweep,
        Experiment::AdaptiveSchedule,
        Experiment::RatioPlot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Convergence => "convergence",
            Experiment::Conditioning => "conditioning",
            Experiment::SolverCompare => "solver-compare",
            Experiment::ThetaSweep => "theta-sweep",
            Experiment::AdaptiveSchedule => "adaptive-schedule",
            Experiment::RatioPlot => "ratio-plot",
        }
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment '{s}'")))
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Step size as a function of the mesh size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauRule {
    /// `tau = h`.
    H,
    /// `tau = h^2`, equivalently `h = sqrt(tau)`.
    H2,
    Fixed(f64),
    /// `k1` steps of `h^2`, then `k2` steps of [`SCHEDULE_TAU2`].
    Schedule { k1: usize, k2: usize },
}

/// Second-phase step of [`TauRule::Schedule`].
pub const SCHEDULE_TAU2: f64 = 1.0 / 32.0;

impl TauRule {
    /// Step size for `M` cells; `None` for schedules.
    pub fn tau(self, m: usize) -> Option<f64> {
        let h = 1.0 / m as f64;
        match self {
            TauRule::H => Some(h),
            TauRule::H2 => Some(h * h),
            TauRule::Fixed(v) => Some(v),
            TauRule::Schedule { .. } => None,
        }
    }
}

impl fmt::Display for TauRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TauRule::H => f.write_str("h"),
            TauRule::H2 => f.write_str("h2"),
            TauRule::Fixed(v) => write!(f, "fixed({v})"),
            TauRule::Schedule { k1, k2 } => write!(f, "schedule({k1},{k2})"),
        }
    }
}

impl FromStr for TauRule {
    type Err = Error;

    /// `h`, `h2` (also `h^2`, `sqrt`), `fixed(v)` where `v` may be `1/d`,
    /// and `schedule(k1,k2)`.
    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let bad = || Error::Config(format!("bad tau rule '{s}' (h|h2|sqrt|fixed(v)|schedule(k1,k2))"));
        let inner = |name: &str| t.strip_prefix(name).and_then(|r| r.strip_prefix('(')).and_then(|r| r.strip_suffix(')'));
        match t.as_str() {
            "h" => return Ok(TauRule::H),
            "h2" | "h^2" | "sqrt" => return Ok(TauRule::H2),
            _ => {}
        }
        if let Some(v) = inner("fixed") {
            let v = parse_number(v).ok_or_else(bad)?;
            if !(v > 0.0) {
                return Err(bad());
            }
            return Ok(TauRule::Fixed(v));
        }
        if let Some(v) = inner("schedule") {
            let (a, b) = v.split_once(',').ok_or_else(bad)?;
            let k1 = a.parse().map_err(|_| bad())?;
            let k2 = b.parse().map_err(|_| bad())?;
            return Ok(TauRule::Schedule { k1, k2 });
        }
        Err(bad())
    }
}

/// A float or a fraction `p/q`.
pub fn parse_number(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((p, q)) => Some(p.trim().parse::<f64>().ok()? / q.trim().parse::<f64>().ok()?),
        None => s.trim().parse().ok(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverChoice {
    Jacobi,
    Cg,
    Amg,
    Adaptive,
}

impl SolverChoice {
    pub fn name(self) -> &'static str {
        match self {
            SolverChoice::Jacobi => "jacobi",
            SolverChoice::Cg => "cg",
            SolverChoice::Amg => "amg",
            SolverChoice::Adaptive => "adaptive",
        }
    }
}

impl FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "jacobi" => SolverChoice::Jacobi,
            "cg" => SolverChoice::Cg,
            "amg" => SolverChoice::Amg,
            "adaptive" | "sad" | "s_ad" => SolverChoice::Adaptive,
            _ => return Err(Error::Config(format!("unknown solver '{s}' (jacobi|cg|amg|adaptive)"))),
        })
    }
}

/// Right-hand side of single-step solver studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhsMode {
    /// The scheme's `G^n` at the representative step.
    Scheme,
    /// Uniform on `(-1, 1)` from the configured seed.
    Random,
    /// `C x` for `x` uniform on `(-1, 1)`.
    Manufactured,
}

impl FromStr for RhsMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scheme" => Ok(RhsMode::Scheme),
            "random" => Ok(RhsMode::Random),
            "manufactured" => Ok(RhsMode::Manufactured),
            _ => Err(Error::Config(format!("unknown rhs mode '{s}' (scheme|random|manufactured)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// `(alpha, beta)` pairs.
    pub pairs: Vec<(f64, f64)>,
    pub ms: Vec<usize>,
    pub ns: Vec<usize>,
    pub tau_rules: Vec<TauRule>,
    pub solvers: Vec<SolverChoice>,
    pub thetas: Vec<f64>,
    pub amg: AmgConfig,
    pub switch_rule: SwitchRule,
    pub tol: f64,
    pub max_iters: usize,
    pub rhs: RhsMode,
    pub seed: u64,
    pub eig: EigMethod,
    /// Attach reference values and relative deviations.
    pub compare: bool,
}

/// Cartesian product of `alphas x betas`; a `NaN` alpha stands for `alpha = beta`.
pub fn grid_pairs(alphas: &[f64], betas: &[f64]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(alphas.len() * betas.len());
    for &b in betas {
        for &a in alphas {
            out.push((if a.is_nan() { b } else { a }, b));
        }
    }
    out
}

const SWEEP_THETAS_512: [f64; 10] = [1e-4, 1e-3, 0.00684, 0.00685, 0.01, 0.1, 0.16042, 0.16043, 0.25, 0.5];
const SWEEP_THETAS_2048: [f64; 10] = [1e-4, 1e-3, 0.00684, 0.00685, 0.01, 0.1, 0.1603, 0.1604, 0.2, 0.25];

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            pairs: Vec::new(),
            ms: Vec::new(),
            ns: Vec::new(),
            tau_rules: Vec::new(),
            solvers: Vec::new(),
            thetas: Vec::new(),
            amg: AmgConfig::default(),
            switch_rule: SwitchRule::Exponent,
            tol: DEFAULT_TOL,
            max_iters: DEFAULT_MAX_ITERS,
            rhs: RhsMode::Scheme,
            seed: 0,
            eig: EigMethod::Auto,
            compare: false,
        }
    }

    /// The parameter grids of the reference tables for `experiment`.
    pub fn presets(experiment: Experiment) -> Vec<Self> {
        let base = Self::new(experiment);
        let with = |rule: TauRule, pairs: Vec<(f64, f64)>, ms: &[usize], ns: &[usize]| Self {
            pairs,
            ms: ms.to_vec(),
            ns: ns.to_vec(),
            tau_rules: vec![rule],
            ..base.clone()
        };
        let alphas6 = [0.01, 0.1, 0.25, 0.5, 0.75, 0.99];
        let fixed = TauRule::Fixed(1.0 / 32.0);
        match experiment {
            Experiment::Convergence => vec![
                with(TauRule::H, grid_pairs(&alphas6, &[0.6, 0.8]), &[], &[8, 16, 32, 64]),
                with(TauRule::H2, grid_pairs(&alphas6, &[0.6, 0.8]), &[], &[16, 64, 256]),
            ],
            Experiment::Conditioning => {
                let mut p5 = grid_pairs(&[0.99, 0.5, 0.01], &[0.6, 0.8]);
                p5.extend(grid_pairs(&[0.01, 0.99], &[0.999]));
                vec![
                    with(TauRule::H, grid_pairs(&[0.99, 0.5, 0.01], &[0.6, 0.8]), &[8, 16, 32, 64], &[]),
                    with(TauRule::H2, grid_pairs(&[0.5, 0.01, f64::NAN], &[0.6, 0.8]), &[8, 16, 32, 64], &[]),
                    with(fixed, p5, &[32, 64, 128, 256, 512], &[]),
                ]
            }
            Experiment::SolverCompare => {
                let all = vec![SolverChoice::Jacobi, SolverChoice::Cg, SolverChoice::Amg];
                let two = vec![SolverChoice::Cg, SolverChoice::Amg];
                vec![
                    Self {
                        solvers: all,
                        ..with(TauRule::H2, vec![(0.6, 0.6), (0.8, 0.8)], &[32, 64, 128, 256, 512, 1024, 2048, 4096], &[])
                    },
                    Self {
                        solvers: two.clone(),
                        ..with(fixed, grid_pairs(&[0.6], &[0.6, 0.8, 0.99]), &[512, 1024, 2048, 4096], &[])
                    },
                    Self { solvers: two, ..with(TauRule::H, vec![(0.2, 0.6), (0.6, 0.8)], &[128, 256, 512, 1024], &[]) },
                ]
            }
            Experiment::ThetaSweep => vec![
                Self { thetas: SWEEP_THETAS_512.to_vec(), ..with(fixed, grid_pairs(&[0.6], &[0.8, 0.99]), &[512], &[]) },
                Self { thetas: SWEEP_THETAS_2048.to_vec(), ..with(fixed, grid_pairs(&[0.6], &[0.8, 0.99]), &[2048], &[]) },
            ],
            Experiment::AdaptiveSchedule => {
                let mut rules: Vec<TauRule> =
                    [25, 50, 75, 100].iter().map(|&k| TauRule::Schedule { k1: k, k2: k }).collect();
                rules.extend([25, 50, 75, 100].iter().map(|&k| TauRule::Schedule { k1: 3 * k, k2: k }));
                vec![Self {
                    tau_rules: rules,
                    ..with(fixed, vec![(0.8, 0.8)], &[1024, 2048], &[])
                }]
            }
            Experiment::RatioPlot => vec![with(fixed, vec![(0.6, 0.8)], &[512], &[])],
        }
    }

    /// The preset for `experiment` whose first tau rule is `rule`, or the
    /// first preset with its rules replaced by `rule`.
    pub fn preset_for(experiment: Experiment, rule: Option<TauRule>) -> Self {
        let presets = Self::presets(experiment);
        match rule {
            None => presets[0].clone(),
            Some(r) => presets.iter().find(|p| p.tau_rules.first() == Some(&r)).cloned().unwrap_or_else(|| {
                let mut p = presets[0].clone();
                p.tau_rules = vec![r];
                p
            }),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |m: String| Err(Error::Config(m));
        if self.pairs.is_empty() {
            return cfg("empty (alpha, beta) grid".into());
        }
        for &(a, b) in &self.pairs {
            check_orders(a, b).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.tau_rules.is_empty() {
            return cfg("empty tau-rule list".into());
        }
        if !(self.tol > 0.0) || self.max_iters == 0 {
            return cfg("need tol > 0 and max_iters >= 1".into());
        }
        self.amg.validate()?;
        let e = self.experiment;
        for r in &self.tau_rules {
            let ok = match e {
                Experiment::Convergence => matches!(r, TauRule::H | TauRule::H2),
                Experiment::AdaptiveSchedule => matches!(r, TauRule::Schedule { .. }),
                _ => !matches!(r, TauRule::Schedule { .. }),
            };
            if !ok {
                return cfg(format!("tau rule {r} does not apply to {e}"));
            }
        }
        if e == Experiment::Convergence {
            if self.ns.is_empty() {
                return cfg("convergence needs a non-empty N grid".into());
            }
            for &n in &self.ns {
                let ok_h = n >= 2;
                let root = (n as f64).sqrt().round() as usize;
                let ok_sqrt = root >= 2 && root * root == n;
                for r in &self.tau_rules {
                    if (*r == TauRule::H && !ok_h) || (*r == TauRule::H2 && !ok_sqrt) {
                        return cfg(format!("N = {n} is incompatible with tau rule {r}"));
                    }
                }
            }
        } else {
            if self.ms.is_empty() {
                return cfg(format!("{e} needs a non-empty M grid"));
            }
            if let Some(m) = self.ms.iter().find(|&&m| m < 4) {
                return cfg(format!("M = {m} is too small (need M >= 4)"));
            }
        }
        if e == Experiment::SolverCompare && self.solvers.is_empty() {
            return cfg("solver-compare needs at least one solver".into());
        }
        if e == Experiment::ThetaSweep {
            if self.thetas.is_empty() {
                return cfg("theta-sweep needs a non-empty theta grid".into());
            }
            if let Some(t) = self.thetas.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
                return cfg(format!("theta must lie in (0,1), got {t}"));
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical (`Debug`) form of the configuration.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(format!("{self:?}").as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Comment header embedded in every emitted table.
    pub fn header(&self) -> String {
        format!(
            "fracamg {} experiment={} config-sha256={}",
            crate::VERSION,
            self.experiment,
            self.hash()
        )
    }
}
