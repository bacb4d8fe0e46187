//! Per-step choice between a cheap Krylov/relaxation solver and AMG.

use super::{cg_solve, jacobi_solve, solve_amg_cached, AmgHierarchy, SolveReport, SolverConfig, SolverKind};
use crate::error::{Error, Result};
use crate::toeplitz::ToeplitzOperator;

/// Absolute slack on `mu * alpha >= 2 beta`; `tau = h^2, alpha = beta` sits on
/// the boundary and must count as satisfied.
const EXPONENT_SLACK: f64 = 1e-12;

pub const DEFAULT_KAPPA_BUDGET: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepContext {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub h: f64,
}

impl StepContext {
    /// `mu` with `tau = h^mu`.
    pub fn mu(&self) -> f64 {
        self.tau.ln() / self.h.ln()
    }

    /// `tau^alpha h^(-2 beta)`, the growth term of the condition number.
    pub fn kappa_indicator(&self) -> f64 {
        self.tau.powf(self.alpha) * self.h.powf(-2.0 * self.beta)
    }
}

/// Predicate for the well-conditioned regime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SwitchRule {
    /// `mu alpha >= 2 beta`.
    Exponent,
    /// `tau^alpha h^(-2 beta) <= budget`.
    KappaBudget(f64),
}

impl Default for SwitchRule {
    fn default() -> Self {
        SwitchRule::KappaBudget(DEFAULT_KAPPA_BUDGET)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fallback {
    Cg,
    Jacobi { omega: f64 },
}

/// `true` when the step is well conditioned and the fallback should run.
pub fn select(ctx: &StepContext, rule: SwitchRule) -> Result<bool> {
    if !(ctx.h > 0.0 && ctx.h < 1.0) || !(ctx.tau > 0.0) {
        return Err(Error::Domain(format!(
            "need 0 < h < 1 and tau > 0, got h = {}, tau = {}",
            ctx.h, ctx.tau
        )));
    }
    Ok(match rule {
        SwitchRule::Exponent => ctx.mu() * ctx.alpha >= 2.0 * ctx.beta - EXPONENT_SLACK,
        SwitchRule::KappaBudget(budget) => ctx.kappa_indicator() <= budget,
    })
}

pub fn adaptive_solve(
    ctx: &StepContext,
    op: &ToeplitzOperator,
    hierarchy: &mut Option<AmgHierarchy>,
    b: &[f64],
    x0: Option<&[f64]>,
    config: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let SolverKind::Adaptive { fallback, rule, amg } = &config.kind else {
        return Err(Error::Config("adaptive_solve needs an adaptive solver config".into()));
    };
    let (tol, max_iters) = (config.tol, config.max_iters);
    if select(ctx, *rule)? {
        match fallback {
            Fallback::Cg => cg_solve(op, b, x0, tol, max_iters),
            Fallback::Jacobi { omega } => jacobi_solve(op, b, x0, *omega, tol, max_iters),
        }
    } else {
        solve_amg_cached(op, hierarchy, b, x0, amg, tol, max_iters)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(alpha: f64, beta: f64, tau: f64, h: f64) -> StepContext {
        StepContext { alpha, beta, tau, h }
    }

    #[test]
    fn boundary_case_counts_as_well_conditioned() {
        for m in [32usize, 64, 1024, 4096] {
            let h = 1.0 / m as f64;
            assert!(select(&ctx(0.6, 0.6, h * h, h), SwitchRule::Exponent).unwrap());
            assert!(select(&ctx(0.8, 0.8, h * h, h), SwitchRule::Exponent).unwrap());
        }
    }

    #[test]
    fn fixed_step_selects_amg() {
        let h = 1.0 / 1024.0;
        assert!(!select(&ctx(0.8, 0.8, 1.0 / 32.0, h), SwitchRule::Exponent).unwrap());
        assert!(!select(&ctx(0.8, 0.8, 1.0 / 32.0, h), SwitchRule::default()).unwrap());
    }

    #[test]
    fn kappa_budget_threshold() {
        let c = ctx(0.5, 0.5, 0.01, 0.1);
        // 0.01^0.5 / 0.1 = 1
        assert!((c.kappa_indicator() - 1.0).abs() < 1e-12);
        assert!(select(&c, SwitchRule::KappaBudget(1.0 + 1e-9)).unwrap());
        assert!(!select(&c, SwitchRule::KappaBudget(0.5)).unwrap());
    }

    #[test]
    fn rejects_bad_mesh() {
        assert!(select(&ctx(0.5, 0.5, 0.1, 1.0), SwitchRule::Exponent).is_err());
        assert!(select(&ctx(0.5, 0.5, 0.0, 0.1), SwitchRule::Exponent).is_err());
    }
}
