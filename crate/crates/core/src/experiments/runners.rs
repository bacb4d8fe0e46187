use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::fixtures;
use super::table::{Cell, Table};
use super::{Experiment, ExperimentConfig, RhsMode, SolverChoice, TauRule, SCHEDULE_TAU2};
use crate::assembly::{assemble_rhs, coefficient_matrix, l2_error, mass, stiffness};
use crate::error::{Error, Result};
use crate::march::{march, march_with, MarchOptions};
use crate::problem::ProblemSpec;
use crate::solvers::{
    solve, theta_reference, AmgConfig, Fallback, Method, SolveReport, SolverConfig, SolverKind, StepContext, Theta,
};
use crate::spectral::extreme_eigs;
use crate::timegrid::TimeGrid;
use crate::toeplitz::{SymToeplitz, ToeplitzOperator};

/// Tolerance of the AMG march that builds the history before a
/// representative step.
const WARMUP_TOL: f64 = 1e-10;

/// Relative `theta` gap and iteration drop that count as a discontinuity.
const THRESHOLD_GAP: f64 = 0.01;
const THRESHOLD_DROP: f64 = 0.75;

/// Runs `config` and returns the result table, sorted on its parameter columns.
pub fn run(config: &ExperimentConfig) -> Result<Table> {
    config.validate()?;
    let (mut table, compared): (Table, &[&str]) = match config.experiment {
        Experiment::Convergence => (run_convergence(config)?, &["error", "rate"]),
        Experiment::Conditioning => (run_conditioning(config)?, &["lambda_min", "lambda_max", "kappa", "ratio"]),
        Experiment::SolverCompare => (run_solver_compare(config)?, &["its"]),
        Experiment::ThetaSweep => (run_theta_sweep(config)?, &["its", "C_g", "C_o"]),
        Experiment::AdaptiveSchedule => (run_adaptive_schedule(config)?, &["its"]),
        Experiment::RatioPlot => (run_ratio_plot(config)?, &[]),
    };
    table.sort_by_keys();
    if config.compare {
        fixtures::annotate(&mut table, &fixtures::all(), compared);
    }
    Ok(table)
}

fn rules(config: &ExperimentConfig) -> String {
    config.tau_rules.iter().map(|r| r.to_string()).collect::<Vec<_>>().join(", ")
}

fn its_cell(report: &SolveReport, max_iters: usize) -> Cell {
    if report.converged {
        Cell::Int(report.iterations as u64)
    } else {
        Cell::Text(format!(">{max_iters}"))
    }
}

fn secs(report: &SolveReport) -> Cell {
    Cell::Num(report.wall_time.as_secs_f64())
}

fn run_convergence(config: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(
        format!("convergence: L2 error at t = 1 and observed order in N (tau rule {})", rules(config)),
        &["alpha", "beta", "tau_rule", "N", "M", "error", "rate"],
        4,
    );
    let solver = solver_config(config, config.solvers.first().copied().unwrap_or(SolverChoice::Cg));
    let mut ns = config.ns.clone();
    ns.sort_unstable();
    ns.dedup();
    let cells: Vec<(f64, f64, TauRule)> = config
        .pairs
        .iter()
        .flat_map(|&(a, b)| config.tau_rules.iter().map(move |&r| (a, b, r)))
        .collect();
    let rows: Vec<Vec<Vec<Cell>>> = cells
        .par_iter()
        .map(|&(alpha, beta, rule)| {
            let mut prev: Option<(usize, f64)> = None;
            let mut rows = Vec::with_capacity(ns.len());
            for &n in &ns {
                let m = match rule {
                    TauRule::H2 => (n as f64).sqrt().round() as usize,
                    _ => n,
                };
                let spec = ProblemSpec::manufactured(alpha, beta, m, TimeGrid::uniform(1.0, n)?)?;
                let run = march(&spec, &solver)?;
                let e = l2_error(&spec, run.final_state())?;
                let rate = prev
                    .map(|(pn, pe)| Cell::Num((pe / e).ln() / (n as f64 / pn as f64).ln()))
                    .unwrap_or(Cell::Empty);
                rows.push(vec![
                    Cell::Param(alpha),
                    Cell::Param(beta),
                    Cell::Text(rule.to_string()),
                    Cell::Int(n as u64),
                    Cell::Int(m as u64),
                    Cell::Num(e),
                    rate,
                ]);
                prev = Some((n, e));
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;
    rows.into_iter().flatten().for_each(|r| table.push(r));
    Ok(table)
}

pub(crate) fn system(alpha: f64, beta: f64, m: usize, tau: f64) -> Result<SymToeplitz> {
    let h = 1.0 / m as f64;
    coefficient_matrix(alpha, tau, &mass(m, h)?, &stiffness(beta, m, h)?)
}

fn run_conditioning(config: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(
        format!("conditioning: extreme eigenvalues of C (tau rule {})", rules(config)),
        &["alpha", "beta", "tau_rule", "M", "lambda_min", "lambda_max", "kappa", "ratio", "method"],
        4,
    );
    let mut ms = config.ms.clone();
    ms.sort_unstable();
    ms.dedup();
    let ms = &ms;
    let cells: Vec<(f64, f64, TauRule, usize)> = config
        .pairs
        .iter()
        .flat_map(|&(a, b)| config.tau_rules.iter().flat_map(move |&r| ms.iter().map(move |&m| (a, b, r, m))))
        .collect();
    let reports: Vec<_> = cells
        .par_iter()
        .map(|&(a, b, r, m)| extreme_eigs(&system(a, b, m, r.tau(m).expect("validated rule"))?, config.eig))
        .collect::<Result<_>>()?;
    for (i, (&(a, b, r, m), rep)) in cells.iter().zip(&reports).enumerate() {
        let ratio = (i > 0)
            .then(|| (cells[i - 1], &reports[i - 1]))
            .filter(|((pa, pb, pr, pm), _)| *pa == a && *pb == b && pr == &r && pm * 2 == m)
            .map(|(_, p)| Cell::Num(rep.kappa / p.kappa))
            .unwrap_or(Cell::Empty);
        table.push(vec![
            Cell::Param(a),
            Cell::Param(b),
            Cell::Text(r.to_string()),
            Cell::Int(m as u64),
            Cell::Num(rep.lambda_min),
            Cell::Num(rep.lambda_max),
            Cell::Num(rep.kappa),
            ratio,
            Cell::Text(format!("{:?}", rep.method).to_lowercase()),
        ]);
    }
    Ok(table)
}

/// Step index used for single-step studies: 1 when `tau` depends on `h`,
/// `N/2` (with `N = round(1/tau)`) for a fixed step.
pub fn representative_step(rule: TauRule) -> usize {
    match rule {
        TauRule::Fixed(v) => (((1.0 / v).round() as usize) / 2).max(1),
        _ => 1,
    }
}

/// Coefficient matrix and right-hand side of a representative step.
pub fn representative_rhs(
    alpha: f64,
    beta: f64,
    m: usize,
    rule: TauRule,
    rhs: RhsMode,
    seed: u64,
) -> Result<(SymToeplitz, Vec<f64>)> {
    let tau = rule
        .tau(m)
        .ok_or_else(|| Error::Config(format!("tau rule {rule} has no single step size")))?;
    let h = 1.0 / m as f64;
    let (mm, aa) = (mass(m, h)?, stiffness(beta, m, h)?);
    let c = coefficient_matrix(alpha, tau, &mm, &aa)?;
    let b = match rhs {
        RhsMode::Random => random_vector(m - 1, seed ^ (m as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)),
        RhsMode::Manufactured => {
            c.direct_matvec(&random_vector(m - 1, seed ^ (m as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)))?
        }
        RhsMode::Scheme => {
            let n = representative_step(rule);
            let spec = ProblemSpec::manufactured(alpha, beta, m, TimeGrid::from_steps(&vec![tau; n])?)?;
            let warm = SolverConfig::amg().with_tol(WARMUP_TOL);
            let hist = march_with(&spec, &warm, MarchOptions { warm_start: true, steps: Some(n - 1) })?.history;
            assemble_rhs(&spec, n, &hist, &mm, &aa)?
        }
    };
    Ok((c, b))
}

fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn solver_config(config: &ExperimentConfig, choice: SolverChoice) -> SolverConfig {
    let kind = match choice {
        SolverChoice::Jacobi => SolverKind::Jacobi { omega: 1.0 },
        SolverChoice::Cg => SolverKind::Cg,
        SolverChoice::Amg => SolverKind::Amg(config.amg.clone()),
        SolverChoice::Adaptive => {
            SolverKind::Adaptive { fallback: Fallback::Cg, rule: config.switch_rule, amg: config.amg.clone() }
        }
    };
    SolverConfig::new(kind).with_tol(config.tol).with_max_iters(config.max_iters)
}

/// Solve of one system from a zero start; CG breakdowns are returned as `None`.
fn timed_solve(
    op: &ToeplitzOperator,
    b: &[f64],
    solver: &SolverConfig,
    ctx: &StepContext,
) -> Result<Option<SolveReport>> {
    match solve(op, &mut None, b, None, solver, Some(ctx)) {
        Ok((_, report)) => Ok(Some(report)),
        Err(Error::CgBreakdown { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn run_solver_compare(config: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(
        format!("solver-compare: iterations and wall time of one step (tau rule {})", rules(config)),
        &["alpha", "beta", "tau_rule", "M", "solver", "its", "residual", "T_c"],
        5,
    );
    for &(alpha, beta) in &config.pairs {
        for &rule in &config.tau_rules {
            for &m in &config.ms {
                let (c, b) = representative_rhs(alpha, beta, m, rule, config.rhs, config.seed)?;
                let tau = rule.tau(m).expect("validated rule");
                let ctx = StepContext { alpha, beta, tau, h: 1.0 / m as f64 };
                let op = ToeplitzOperator::new(c);
                for &choice in &config.solvers {
                    let report = timed_solve(&op, &b, &solver_config(config, choice), &ctx)?;
                    let (its, res, t) = match &report {
                        Some(r) => (its_cell(r, config.max_iters), Cell::Num(r.final_residual()), secs(r)),
                        None => (Cell::Text("breakdown".into()), Cell::Empty, Cell::Empty),
                    };
                    table.push(vec![
                        Cell::Param(alpha),
                        Cell::Param(beta),
                        Cell::Text(rule.to_string()),
                        Cell::Int(m as u64),
                        Cell::Text(choice.name().into()),
                        its,
                        res,
                        t,
                    ]);
                }
            }
        }
    }
    Ok(table)
}

/// First `theta` (ascending) at which the iteration count falls by at least
/// a quarter across a relative `theta` gap of at most 1%.
pub fn empirical_threshold(points: &[(f64, usize)]) -> Option<f64> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    p.windows(2)
        .find(|w| w[1].0 <= w[0].0 * (1.0 + THRESHOLD_GAP) && (w[1].1 as f64) <= THRESHOLD_DROP * w[0].1 as f64)
        .map(|w| w[1].0)
}

fn run_theta_sweep(config: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(
        format!("theta-sweep: classical AMG against the strength threshold (tau rule {})", rules(config)),
        &["alpha", "beta", "tau_rule", "M", "theta", "its", "residual", "T_c", "C_g", "C_o", "levels", "flag"],
        5,
    );
    let mut thetas = config.thetas.clone();
    thetas.sort_by(|a, b| a.total_cmp(b));
    for &(alpha, beta) in &config.pairs {
        for &rule in &config.tau_rules {
            for &m in &config.ms {
                let (c, b) = representative_rhs(alpha, beta, m, rule, config.rhs, config.seed)?;
                let reference = theta_reference(&c, crate::solvers::amg::DEFAULT_EPSILON0)?;
                let op = ToeplitzOperator::new(c);
                let ctx = StepContext { alpha, beta, tau: rule.tau(m).expect("validated rule"), h: 1.0 / m as f64 };
                let first = table.rows.len();
                let mut points = Vec::with_capacity(thetas.len());
                for &theta in &thetas {
                    let amg = AmgConfig { theta: Theta::Fixed(theta), ..config.amg.clone() };
                    let solver = SolverConfig::new(SolverKind::Amg(amg))
                        .with_tol(config.tol)
                        .with_max_iters(config.max_iters);
                    let r = timed_solve(&op, &b, &solver, &ctx)?.expect("AMG does not break down");
                    let stats = r.amg.clone().expect("AMG report carries stats");
                    points.push((theta, if r.converged { r.iterations } else { config.max_iters + 1 }));
                    table.push(vec![
                        Cell::Param(alpha),
                        Cell::Param(beta),
                        Cell::Text(rule.to_string()),
                        Cell::Int(m as u64),
                        Cell::Param(theta),
                        its_cell(&r, config.max_iters),
                        Cell::Num(r.final_residual()),
                        secs(&r),
                        Cell::Num(stats.grid_complexity),
                        Cell::Num(stats.operator_complexity),
                        Cell::Int(stats.levels as u64),
                        Cell::Empty,
                    ]);
                }
                let threshold = empirical_threshold(&points);
                if let Some(t0) = threshold {
                    let flag = table.columns.len() - 1;
                    for row in &mut table.rows[first..] {
                        if row[4] == Cell::Param(t0) {
                            row[flag] = Cell::Text("theta_0".into());
                        }
                    }
                }
                table.notes.push(format!(
                    "alpha={alpha} beta={beta} tau_rule={rule} M={m}: theta_reference={reference:.6} theta_0={}",
                    threshold.map_or("none".to_string(), |t| t.to_string())
                ));
            }
        }
    }
    Ok(table)
}

fn strategy_name(choice: SolverChoice) -> &'static str {
    match choice {
        SolverChoice::Adaptive => "S_ad",
        SolverChoice::Cg => "CG",
        SolverChoice::Amg => "AMG",
        SolverChoice::Jacobi => "Jacobi",
    }
}

fn run_adaptive_schedule(config: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(
        format!("adaptive-schedule: cumulative iterations over tau = h^2 then tau = {SCHEDULE_TAU2}"),
        &["alpha", "beta", "M", "K1", "K2", "strategy", "its", "T_c", "cg_steps", "amg_steps"],
        6,
    );
    let strategies = if config.solvers.is_empty() {
        vec![SolverChoice::Adaptive, SolverChoice::Cg, SolverChoice::Amg]
    } else {
        config.solvers.clone()
    };
    for &(alpha, beta) in &config.pairs {
        for &m in &config.ms {
            for &rule in &config.tau_rules {
                let TauRule::Schedule { k1, k2 } = rule else { unreachable!("validated rule") };
                let h = 1.0 / m as f64;
                let grid = TimeGrid::two_phase(h * h, k1, SCHEDULE_TAU2, k2)?;
                let spec = ProblemSpec::manufactured(alpha, beta, m, grid)?;
                for &choice in &strategies {
                    let run = march(&spec, &solver_config(config, choice))?;
                    let count = |meth: Method| run.reports.iter().filter(|r| r.method == meth).count() as u64;
                    let t: f64 = run.reports.iter().map(|r| r.wall_time.as_secs_f64()).sum();
                    table.push(vec![
                        Cell::Param(alpha),
                        Cell::Param(beta),
                        Cell::Int(m as u64),
                        Cell::Int(k1 as u64),
                        Cell::Int(k2 as u64),
                        Cell::Text(strategy_name(choice).into()),
                        Cell::Int(run.total_iterations() as u64),
                        Cell::Num(t),
                        Cell::Int(count(Method::Cg)),
                        Cell::Int(count(Method::Amg)),
                    ]);
                }
            }
        }
    }
    Ok(table)
}

fn run_ratio_plot(config: &ExperimentConfig) -> Result<Table> {
    let mut table = Table::new(
        format!("ratio-plot: first-row ratios c_1j / c_12 of C (tau rule {})", rules(config)),
        &["alpha", "beta", "tau_rule", "M", "j", "ratio"],
        5,
    );
    for &(alpha, beta) in &config.pairs {
        for &rule in &config.tau_rules {
            for &m in &config.ms {
                let c = system(alpha, beta, m, rule.tau(m).expect("validated rule"))?;
                let row = c.first_row();
                for j in 2..=row.len() {
                    table.push(vec![
                        Cell::Param(alpha),
                        Cell::Param(beta),
                        Cell::Text(rule.to_string()),
                        Cell::Int(m as u64),
                        Cell::Int(j as u64),
                        Cell::Num(row[j - 1] / row[1]),
                    ]);
                }
                table.notes.push(format!(
                    "alpha={alpha} beta={beta} tau_rule={rule} M={m}: theta_reference={:.6}",
                    theta_reference(&c, crate::solvers::amg::DEFAULT_EPSILON0)?
                ));
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_detection() {
        let pts = [(0.1, 13), (0.16042, 13), (0.16043, 7), (0.25, 7), (0.0001, 293)];
        assert_eq!(empirical_threshold(&pts), Some(0.16043));
        assert_eq!(empirical_threshold(&[(0.01, 23), (0.1, 13)]), None);
    }

    #[test]
    fn representative_steps() {
        assert_eq!(representative_step(TauRule::Fixed(1.0 / 32.0)), 16);
        assert_eq!(representative_step(TauRule::H), 1);
        assert_eq!(representative_step(TauRule::Fixed(2.0)), 1);
    }

    #[test]
    fn random_rhs_is_seeded() {
        let a = representative_rhs(0.5, 0.7, 16, TauRule::H, RhsMode::Random, 7).unwrap().1;
        let b = representative_rhs(0.5, 0.7, 16, TauRule::H, RhsMode::Random, 7).unwrap().1;
        let c = representative_rhs(0.5, 0.7, 16, TauRule::H, RhsMode::Random, 8).unwrap().1;
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|v| v.abs() < 1.0));
    }

    #[test]
    fn small_convergence_table() {
        let mut c = ExperimentConfig::preset_for(Experiment::Convergence, None);
        c.pairs = vec![(0.5, 0.6)];
        c.ns = vec![8, 16];
        c.compare = true;
        let t = run(&c).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!(t.get(0, "rate"), Some(&Cell::Empty));
        let dev = t.get(0, "error_dev").unwrap().as_f64().unwrap();
        assert!(dev < 2e-2, "{dev}");
        let rate = t.get(1, "rate").unwrap().as_f64().unwrap();
        assert!((1.9..2.3).contains(&rate), "{rate}");
    }

    #[test]
    fn degenerate_schedule_equals_fallback() {
        let mut c = ExperimentConfig::preset_for(Experiment::AdaptiveSchedule, None);
        c.ms = vec![32];
        c.tau_rules = vec![TauRule::Schedule { k1: 4, k2: 0 }];
        let t = run(&c).unwrap();
        let its = |s: &str| {
            let r = t.rows.iter().position(|r| r[5] == Cell::Text(s.into())).unwrap();
            (t.rows[r][6].clone(), t.rows[r][9].clone())
        };
        assert_eq!(its("S_ad").0, its("CG").0);
        assert_eq!(its("S_ad").1, Cell::Int(0));
    }
}
