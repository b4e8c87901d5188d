//! Dense linear algebra and probability distributions.
//!
//! Everything here is self-contained: a row-major [`Matrix`], a Cholesky
//! path for symmetric positive definite systems, and the standard normal,
//! Student-t and chi-square distributions built on regularized incomplete
//! gamma and beta functions.

mod chol;
mod dist;
mod matrix;
mod special;

pub use chol::{cholesky, invert_spd, solve_spd, SpdFactor};
pub use dist::{dist_cdf, dist_quantile, Dist};
pub use matrix::{dot, Matrix};
pub use special::{beta_inc, erfc, gamma_p, gamma_q, ln_gamma};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumError {
    #[error("matrix is not positive definite (pivot {pivot:.3e} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric (max asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("invalid matrix: {0}")]
    InvalidMatrix(String),
    #[error("argument outside the domain: {0}")]
    DomainError(String),
}
