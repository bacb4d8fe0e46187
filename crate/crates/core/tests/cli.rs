use std::process::{Command, Output};

use fracamg::experiments::{parse_csv, Table};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracamg")).args(args).output().expect("binary runs")
}

fn stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Output with timing columns blanked.
fn without_timing(csv: &str) -> Vec<Vec<String>> {
    let (header, rows) = parse_csv(csv).unwrap();
    let keep: Vec<bool> = header.iter().map(|c| !Table::is_timing(c)).collect();
    std::iter::once(header.clone())
        .chain(rows)
        .map(|r| r.into_iter().zip(&keep).filter(|(_, k)| **k).map(|(v, _)| v).collect())
        .collect()
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    assert_eq!(run(&["--bogus"]).status.code(), Some(3));
    assert_eq!(run(&["--experiment", "nope"]).status.code(), Some(3));
    assert_eq!(run(&["--experiment", "conditioning", "--alpha", "1.5", "--beta", "0.8", "--M", "8"]).status.code(), Some(3));
    assert_eq!(run(&["--experiment", "convergence", "--tau-rule", "h", "--N", "10"]).status.code(), Some(0));
    assert_eq!(run(&["--experiment", "convergence", "--tau-rule", "h2", "--N", "10"]).status.code(), Some(3));
    assert_eq!(run(&["--experiment", "solver-compare", "--M", "64", "--tau-rule", "h", "--nu1", "0", "--nu2", "0"]).status.code(), Some(3));
    let failed = run(&[
        "--experiment", "convergence", "--tau-rule", "h", "--N", "8", "--alpha", "0.5", "--beta", "0.7", "--solver", "cg",
        "--max-iters", "1",
    ]);
    assert_eq!(failed.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&failed.stderr).contains("did not converge"));
    let io = run(&["--experiment", "conditioning", "--M", "8", "--tau-rule", "h", "--out", "/nonexistent/dir/x.csv"]);
    assert_eq!(io.status.code(), Some(1));
}

#[test]
fn outputs_are_deterministic_apart_from_timing() {
    let args = ["--experiment", "solver-compare", "--tau-rule", "h", "--M", "64,128", "--alpha", "0.6", "--beta", "0.8"];
    let (a, b) = (stdout(&args), stdout(&args));
    assert_eq!(without_timing(&a), without_timing(&b));
    let args = ["--experiment", "conditioning", "--tau-rule", "h", "--M", "8,16,32"];
    assert_eq!(stdout(&args), stdout(&args));
}

#[test]
fn header_carries_version_and_config_hash() {
    let a = stdout(&["--experiment", "conditioning", "--tau-rule", "h", "--M", "8,16"]);
    let b = stdout(&["--experiment", "conditioning", "--tau-rule", "h", "--M", "8,32"]);
    let first = |s: &str| s.lines().next().unwrap().to_string();
    assert!(first(&a).starts_with(&format!("# fracamg {} experiment=conditioning config-sha256=", fracamg::VERSION)));
    let hash = |s: &str| first(s).rsplit('=').next().unwrap().to_string();
    assert_eq!(hash(&a).len(), 64);
    assert_ne!(hash(&a), hash(&b));
}

#[test]
fn csv_round_trips_and_uses_scientific_notation() {
    let text = stdout(&["--experiment", "conditioning", "--tau-rule", "h", "--alpha", "0.5", "--beta", "0.6", "--M", "8,16"]);
    assert!(text.contains("\r\n"));
    let (header, rows) = parse_csv(&text).unwrap();
    assert_eq!(header, ["alpha", "beta", "tau_rule", "M", "lambda_min", "lambda_max", "kappa", "ratio", "method"]);
    assert_eq!(rows.len(), 2);
    let kappa = &rows[1][6];
    assert!(kappa.len() == 9 && kappa.contains('E'), "{kappa}");
    assert!(kappa.parse::<f64>().unwrap() > 1.0);
    assert_eq!(rows[0][7], "");
}

#[test]
fn compare_flag_adds_reference_columns() {
    let text = stdout(&[
        "--experiment", "convergence", "--tau-rule", "h", "--alpha", "0.1", "--beta", "0.6", "--N", "8,16", "--compare-paper",
    ]);
    let (header, rows) = parse_csv(&text).unwrap();
    for c in ["error_ref", "error_dev", "rate_ref", "rate_dev", "ref_source"] {
        assert!(header.iter().any(|h| h == c), "{c} in {header:?}");
    }
    let dev = header.iter().position(|h| h == "error_dev").unwrap();
    assert!(rows.iter().all(|r| r[dev].parse::<f64>().unwrap() < 2e-2));
}

#[test]
fn markdown_and_file_output() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.md");
    let p = path.to_str().unwrap();
    stdout(&["--experiment", "ratio-plot", "--M", "16", "--format", "markdown", "--out", p]);
    let md = std::fs::read_to_string(&path).unwrap();
    assert!(md.starts_with("<!-- fracamg "));
    assert!(md.contains("| alpha | beta | tau_rule | M | j | ratio |"));
    assert_eq!(md.matches("\n| 0.6 |").count(), 14);
}

#[test]
fn every_solver_compare_row_reports_iterations() {
    let text = stdout(&["--experiment", "solver-compare", "--tau-rule", "h2", "--M", "32", "--alpha", "beta", "--beta", "0.6"]);
    let (header, rows) = parse_csv(&text).unwrap();
    let its = header.iter().position(|h| h == "its").unwrap();
    let solvers: Vec<&str> = rows.iter().map(|r| r[4].as_str()).collect();
    assert_eq!(solvers, ["amg", "cg", "jacobi"]);
    assert!(rows.iter().all(|r| r[0] == "0.6" && r[its].parse::<u64>().is_ok()));
}
