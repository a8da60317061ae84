//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on user-supplied data was violated.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Malformed byte stream; `offset` points at the offending byte.
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    /// Two objects that must live on the same mesh/domain do not.
    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    /// A size guard for dense storage was exceeded.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// The iterative eigensolver ran out of restarts. Carries the best
    /// relative residuals reached for the still-unconverged pairs.
    #[error("eigensolver did not converge after {restarts} restarts (best residuals {residuals:?})")]
    NoConvergence {
        restarts: usize,
        residuals: Vec<f64>,
    },

    /// Projection basis is numerically rank deficient.
    #[error("degenerate basis: {0}")]
    DegenerateBasis(String),

    /// A matrix that must be definite was not.
    #[error("singular system: {0}")]
    Singular(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
