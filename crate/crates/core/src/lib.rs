//! Finite-element discretization of the 1D time-space Caputo-Riesz fractional
//! diffusion equation, with FFT-accelerated Toeplitz operators and Jacobi, CG,
//! classical AMG and adaptive solvers.

// `!(x > 0.0)` style checks reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod dense;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod march;
pub mod problem;
pub mod quadrature;
pub mod solvers;
pub mod special;
pub mod spectral;
pub mod timegrid;
pub mod toeplitz;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
