//! Iterative solvers for the symmetric Toeplitz systems of each time step.

mod adaptive;
pub mod amg;
mod cg;
mod jacobi;

use std::time::{Duration, Instant};

pub use adaptive::{adaptive_solve, select, Fallback, StepContext, SwitchRule};
pub use amg::{
    amg_setup, amg_solve, theta_reference, AmgConfig, AmgHierarchy, AmgStats, FineProducts, Smoother,
    Theta,
};
pub use cg::cg_solve;
pub use jacobi::jacobi_solve;

use crate::error::{Error, Result};
use crate::toeplitz::ToeplitzOperator;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITERS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub enum SolverKind {
    Jacobi { omega: f64 },
    Cg,
    Amg(AmgConfig),
    Adaptive { fallback: Fallback, rule: SwitchRule, amg: AmgConfig },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub kind: SolverKind,
    pub tol: f64,
    pub max_iters: usize,
}

impl SolverConfig {
    pub fn new(kind: SolverKind) -> Self {
        Self { kind, tol: DEFAULT_TOL, max_iters: DEFAULT_MAX_ITERS }
    }

    pub fn jacobi() -> Self {
        Self::new(SolverKind::Jacobi { omega: 1.0 })
    }

    pub fn cg() -> Self {
        Self::new(SolverKind::Cg)
    }

    pub fn amg() -> Self {
        Self::new(SolverKind::Amg(AmgConfig::default()))
    }

    pub fn adaptive(rule: SwitchRule) -> Self {
        Self::new(SolverKind::Adaptive {
            fallback: Fallback::Cg,
            rule,
            amg: AmgConfig::default(),
        })
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be >= 1".into()));
        }
        match &self.kind {
            SolverKind::Jacobi { omega } => check_omega(*omega),
            SolverKind::Cg => Ok(()),
            SolverKind::Amg(c) => c.validate(),
            SolverKind::Adaptive { amg, fallback, .. } => {
                if let Fallback::Jacobi { omega } = fallback {
                    check_omega(*omega)?;
                }
                amg.validate()
            }
        }
    }
}

pub(crate) fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0 && omega <= 1.0) {
        return Err(Error::Config(format!("relaxation weight must lie in (0,1], got {omega}")));
    }
    Ok(())
}

/// Which method actually ran.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Jacobi,
    Cg,
    Amg,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Jacobi => "Jacobi",
            Method::Cg => "CG",
            Method::Amg => "AMG",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub method: Method,
    pub iterations: usize,
    /// Relative residuals `||b - A x_k|| / ||b||`, starting with the initial guess.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub wall_time: Duration,
    pub amg: Option<AmgStats>,
}

impl SolveReport {
    pub(crate) fn start(method: Method) -> Self {
        Self {
            method,
            iterations: 0,
            residual_history: Vec::new(),
            converged: false,
            wall_time: Duration::ZERO,
            amg: None,
        }
    }

    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(0.0)
    }

    /// Converts a non-converged report into [`Error::NotConverged`].
    pub fn require_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NotConverged { iterations: self.iterations, residual: self.final_residual() })
        }
    }
}

/// Dispatches on `config.kind`. `hierarchy` caches the AMG setup for `op`
/// across calls; pass the same slot for every solve with the same matrix.
pub fn solve(
    op: &ToeplitzOperator,
    hierarchy: &mut Option<AmgHierarchy>,
    b: &[f64],
    x0: Option<&[f64]>,
    config: &SolverConfig,
    ctx: Option<&StepContext>,
) -> Result<(Vec<f64>, SolveReport)> {
    let (tol, max_iters) = (config.tol, config.max_iters);
    match &config.kind {
        SolverKind::Jacobi { omega } => jacobi_solve(op, b, x0, *omega, tol, max_iters),
        SolverKind::Cg => cg_solve(op, b, x0, tol, max_iters),
        SolverKind::Amg(amg) => solve_amg_cached(op, hierarchy, b, x0, amg, tol, max_iters),
        SolverKind::Adaptive { .. } => {
            let ctx = ctx.ok_or_else(|| {
                Error::Config("adaptive solver needs the step parameters (alpha, beta, tau, h)".into())
            })?;
            adaptive_solve(ctx, op, hierarchy, b, x0, config)
        }
    }
}

pub(crate) fn solve_amg_cached(
    op: &ToeplitzOperator,
    hierarchy: &mut Option<AmgHierarchy>,
    b: &[f64],
    x0: Option<&[f64]>,
    amg: &AmgConfig,
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    if hierarchy.is_none() {
        *hierarchy = Some(amg_setup(op, amg)?);
    }
    let h = hierarchy.as_ref().unwrap();
    let (x, mut report) = amg_solve(h, b, x0, tol, max_iters)?;
    report.wall_time = start.elapsed();
    Ok((x, report))
}

/// Initial iterate and `||b||`, or an early exit when `b = 0`.
pub(crate) fn initial_guess(
    dim: usize,
    b: &[f64],
    x0: Option<&[f64]>,
) -> Result<(Vec<f64>, f64)> {
    if b.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: b.len() });
    }
    let x = match x0 {
        Some(x0) if x0.len() != dim => {
            return Err(Error::DimensionMismatch { expected: dim, got: x0.len() })
        }
        Some(x0) => x0.to_vec(),
        None => vec![0.0; dim],
    };
    Ok((x, crate::dense::norm2(b)))
}
