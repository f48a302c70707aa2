//! Crate-wide error type.

use thiserror::Error;

use crate::quantkit::QuantizerDesign;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an operation argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Vector or matrix dimensions do not agree.
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// The Lloyd-Max iteration did not reach the requested tolerance.
    /// Carries the last iterate so callers can inspect or accept it.
    #[error("Lloyd-Max did not converge within {iterations} iterations (last max label change {last_delta:.3e})")]
    NonConvergence {
        iterations: usize,
        last_delta: f64,
        last: Box<QuantizerDesign>,
    },

    /// A quantizer design violates a structural invariant.
    #[error("malformed quantizer design: {0}")]
    MalformedDesign(String),

    /// Graph construction or validation failure.
    #[error("topology error: {0}")]
    Topology(String),

    /// A covariance matrix handed to the analysis routines is not Hermitian.
    #[error("matrix is not Hermitian: max asymmetry {0:.3e}")]
    NonHermitian(f64),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
