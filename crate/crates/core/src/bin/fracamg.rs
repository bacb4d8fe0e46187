//! `fracamg`: runs the parameter studies and writes CSV or Markdown tables.
//!
//! Exit codes: 0 success, 1 I/O error, 2 solver failure, 3 configuration error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fracamg::experiments::{self, grid_pairs, Experiment, ExperimentConfig, Format, RhsMode, SolverChoice, TauRule};
use fracamg::solvers::{Smoother, SwitchRule, Theta};
use fracamg::spectral::EigMethod;
use fracamg::Error;

#[derive(Debug, Parser)]
#[command(name = "fracamg", version, about = "Reproduces the conditioning, convergence and solver studies")]
struct Cli {
    /// convergence | conditioning | solver-compare | theta-sweep | adaptive-schedule | ratio-plot
    #[arg(long)]
    experiment: String,
    /// Comma-separated time orders; `beta` means alpha = beta.
    #[arg(long, value_delimiter = ',')]
    alpha: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    beta: Vec<f64>,
    /// Cell counts M.
    #[arg(long = "M", value_delimiter = ',')]
    m: Vec<usize>,
    /// Time step counts N (convergence).
    #[arg(long = "N", value_delimiter = ',')]
    n: Vec<usize>,
    /// h | h2 | sqrt | fixed(v) | schedule(K1,K2); repeat for several.
    #[arg(long = "tau-rule")]
    tau_rule: Vec<String>,
    /// Comma-separated: jacobi, cg, amg, adaptive.
    #[arg(long, value_delimiter = ',')]
    solver: Vec<String>,
    /// Strength threshold: `auto`, a value, or the sweep grid for theta-sweep.
    #[arg(long, value_delimiter = ',')]
    theta: Vec<String>,
    #[arg(long)]
    epsilon0: Option<f64>,
    #[arg(long)]
    nu1: Option<usize>,
    #[arg(long)]
    nu2: Option<usize>,
    /// cf-gs | gs | jacobi[:omega]
    #[arg(long)]
    smoother: Option<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long = "max-iters")]
    max_iters: Option<usize>,
    /// exponent | kappa[:budget]
    #[arg(long = "switch-rule")]
    switch_rule: Option<String>,
    /// scheme | random | manufactured
    #[arg(long)]
    rhs: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// auto | dense | lanczos
    #[arg(long)]
    eig: Option<String>,
    /// csv | markdown
    #[arg(long, default_value = "csv")]
    format: String,
    /// Output file; stdout when omitted or `-`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Add reference values and relative deviations where known.
    #[arg(long = "compare-paper")]
    compare_paper: bool,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_smoother(s: &str) -> Result<Smoother, Error> {
    let (name, arg) = s.split_once(':').map_or((s, None), |(a, b)| (a, Some(b)));
    match name {
        "cf-gs" | "cf" => Ok(Smoother::CfGaussSeidel),
        "gs" => Ok(Smoother::GaussSeidel),
        "jacobi" => {
            let omega = arg.map(str::parse).transpose().map_err(|_| config_err(format!("bad omega in '{s}'")))?;
            Ok(Smoother::DampedJacobi { omega: omega.unwrap_or(1.0) })
        }
        _ => Err(config_err(format!("unknown smoother '{s}' (cf-gs|gs|jacobi[:omega])"))),
    }
}

fn parse_switch_rule(s: &str) -> Result<SwitchRule, Error> {
    match s.split_once(':') {
        None if s == "exponent" => Ok(SwitchRule::Exponent),
        None if s == "kappa" => Ok(SwitchRule::default()),
        Some(("kappa", b)) => {
            b.parse().map(SwitchRule::KappaBudget).map_err(|_| config_err(format!("bad budget in '{s}'")))
        }
        _ => Err(config_err(format!("unknown switch rule '{s}' (exponent|kappa[:budget])"))),
    }
}

fn parse_theta(s: &str, epsilon0: Option<f64>) -> Result<Theta, Error> {
    if s == "auto" {
        return Ok(Theta::Auto { epsilon0: epsilon0.unwrap_or(fracamg::solvers::amg::DEFAULT_EPSILON0) });
    }
    experiments::parse_number(s).map(Theta::Fixed).ok_or_else(|| config_err(format!("bad theta '{s}'")))
}

fn configs(cli: &Cli) -> Result<Vec<ExperimentConfig>, Error> {
    let experiment: Experiment = cli.experiment.parse()?;
    let rules: Vec<TauRule> = cli.tau_rule.iter().map(|r| r.parse()).collect::<Result<_, _>>()?;
    let mut base = if rules.is_empty() {
        ExperimentConfig::presets(experiment)
    } else {
        let mut p = ExperimentConfig::preset_for(experiment, rules.first().copied());
        p.tau_rules = rules;
        vec![p]
    };
    let alphas: Vec<f64> = cli
        .alpha
        .iter()
        .map(|a| if a == "beta" { Ok(f64::NAN) } else { a.parse().map_err(|_| config_err(format!("bad alpha '{a}'"))) })
        .collect::<Result<_, _>>()?;
    let solvers: Vec<SolverChoice> = cli.solver.iter().map(|s| s.parse()).collect::<Result<_, _>>()?;
    for c in &mut base {
        if !alphas.is_empty() || !cli.beta.is_empty() {
            let a: Vec<f64> = if alphas.is_empty() { dedup(c.pairs.iter().map(|p| p.0)) } else { alphas.clone() };
            let b: Vec<f64> = if cli.beta.is_empty() { dedup(c.pairs.iter().map(|p| p.1)) } else { cli.beta.clone() };
            c.pairs = grid_pairs(&a, &b);
        }
        if !cli.m.is_empty() {
            c.ms = cli.m.clone();
        }
        if !cli.n.is_empty() {
            c.ns = cli.n.clone();
        }
        if !solvers.is_empty() {
            c.solvers = solvers.clone();
        }
        if !cli.theta.is_empty() {
            if experiment == Experiment::ThetaSweep {
                c.thetas = cli
                    .theta
                    .iter()
                    .map(|t| experiments::parse_number(t).ok_or_else(|| config_err(format!("bad theta '{t}'"))))
                    .collect::<Result<_, _>>()?;
            } else if let [t] = cli.theta.as_slice() {
                c.amg.theta = parse_theta(t, cli.epsilon0)?;
            } else {
                return Err(config_err("--theta takes a single value outside theta-sweep"));
            }
        } else if let Some(e) = cli.epsilon0 {
            c.amg.theta = Theta::Auto { epsilon0: e };
        }
        if let Some(v) = cli.nu1 {
            c.amg.nu1 = v;
        }
        if let Some(v) = cli.nu2 {
            c.amg.nu2 = v;
        }
        if let Some(s) = &cli.smoother {
            c.amg.smoother = parse_smoother(s)?;
        }
        if let Some(t) = cli.tol {
            c.tol = t;
        }
        if let Some(m) = cli.max_iters {
            c.max_iters = m;
        }
        if let Some(r) = &cli.switch_rule {
            c.switch_rule = parse_switch_rule(r)?;
        }
        if let Some(r) = &cli.rhs {
            c.rhs = r.parse::<RhsMode>()?;
        }
        if let Some(s) = cli.seed {
            c.seed = s;
        }
        if let Some(e) = &cli.eig {
            c.eig = match e.as_str() {
                "auto" => EigMethod::Auto,
                "dense" => EigMethod::Dense,
                "lanczos" => EigMethod::Lanczos,
                _ => return Err(config_err(format!("unknown eigen method '{e}' (auto|dense|lanczos)"))),
            };
        }
        c.compare = cli.compare_paper;
        c.validate()?;
    }
    Ok(base)
}

fn dedup(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse { .. } | Error::Domain(_) => 3,
        Error::Io(_) => 1,
        _ => 2,
    }
}

fn run(cli: &Cli) -> Result<(), Error> {
    let format: Format = cli.format.parse()?;
    let configs = configs(cli)?;
    let mut out = String::new();
    for (i, c) in configs.iter().enumerate() {
        let table = experiments::run(c)?;
        if i > 0 {
            out.push_str(if format == Format::Csv { "\r\n" } else { "\n" });
        }
        out.push_str(&experiments::render(std::slice::from_ref(&table), format, &c.header())?);
    }
    match cli.out.as_deref() {
        Some(p) if p.as_os_str() != "-" => std::fs::write(p, out)?,
        _ => print!("{out}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fracamg: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
