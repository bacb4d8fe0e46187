//! Sequential time stepping `C^n U^n = G^n`, n = 1..N.

use std::collections::HashMap;

use crate::assembly::{assemble_rhs, coefficient_matrix, mass, stiffness, StateHistory};
use crate::error::{Error, Result};
use crate::problem::ProblemSpec;
use crate::solvers::{solve, AmgHierarchy, SolveReport, SolverConfig, StepContext};
use crate::toeplitz::ToeplitzOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[derive(Default)]
pub struct MarchOptions {
    /// Start each solve from `U^{n-1}` instead of zero.
    pub warm_start: bool,
    /// Stop after this many steps (all steps when `None`).
    pub steps: Option<usize>,
}


#[derive(Debug, Clone)]
pub struct MarchResult {
    pub history: StateHistory,
    pub reports: Vec<SolveReport>,
}

impl MarchResult {
    pub fn final_state(&self) -> &[f64] {
        self.history.last()
    }

    pub fn total_iterations(&self) -> usize {
        self.reports.iter().map(|r| r.iterations).sum()
    }
}

/// System matrix and AMG setup for one step size.
struct StepSystem {
    op: ToeplitzOperator,
    hierarchy: Option<AmgHierarchy>,
}

pub fn march(spec: &ProblemSpec, solver: &SolverConfig) -> Result<MarchResult> {
    march_with(spec, solver, MarchOptions::default())
}

/// Marches with per-step-size caching of `C^n`, its FFT plan and the AMG
/// hierarchy. A step that fails to converge aborts with [`Error::Step`].
pub fn march_with(
    spec: &ProblemSpec,
    solver: &SolverConfig,
    opts: MarchOptions,
) -> Result<MarchResult> {
    spec.validate()?;
    solver.validate()?;
    let h = spec.h();
    let mass = mass(spec.cells, h)?;
    let stiff = stiffness(spec.beta, spec.cells, h)?;
    let steps = opts.steps.unwrap_or(spec.grid.steps()).min(spec.grid.steps());
    let mut history = StateHistory::new(spec.initial_state());
    let mut reports = Vec::with_capacity(steps);
    let mut systems: HashMap<u64, StepSystem> = HashMap::new();

    for n in 1..=steps {
        let tau = spec.grid.tau(n);
        let system = match systems.entry(tau.to_bits()) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => {
                let c = coefficient_matrix(spec.alpha, tau, &mass, &stiff)?;
                e.insert(StepSystem { op: ToeplitzOperator::new(c), hierarchy: None })
            }
        };
        let b = assemble_rhs(spec, n, &history, &mass, &stiff)?;
        let ctx = StepContext { alpha: spec.alpha, beta: spec.beta, tau, h };
        let x0 = opts.warm_start.then(|| history.last().to_vec());
        let wrap = |e: Error| Error::Step { step: n, source: Box::new(e) };
        let (x, report) =
            solve(&system.op, &mut system.hierarchy, &b, x0.as_deref(), solver, Some(&ctx))
                .map_err(wrap)?;
        report.require_converged().map_err(wrap)?;
        history.push(x)?;
        reports.push(report);
    }
    Ok(MarchResult { history, reports })
}
