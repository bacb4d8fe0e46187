use thiserror::Error;

/// Errors raised by assembly, solvers and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("index {index} out of range {lo}..={hi}")]
    OutOfRange { index: usize, lo: usize, hi: usize },

    #[error("CG breakdown at iteration {iteration}: p^T A p = {curvature:e}")]
    CgBreakdown { iteration: usize, curvature: f64 },

    #[error("AMG setup failed on level {level}: {reason}")]
    AmgSetup { level: usize, reason: String },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("time step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("Lanczos did not converge after {steps} steps (residual {residual:e})")]
    Lanczos { steps: usize, residual: f64 },

    #[error("problem has no exact solution registered")]
    MissingExact,

    #[error("expression parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
