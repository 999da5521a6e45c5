//! Error type shared by every module.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("differencing polynomials share a root near {0}")]
    NotCoprime(String),
    #[error("parameter outside the stable region: {0}")]
    Unstable(String),
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: String, iterations: usize },
    #[error("degenerate covariance: {0}")]
    Degenerate(String),
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("constraint error: {0}")]
    Constraint(String),
    #[error("non-finite objective at the initial point")]
    NonFiniteStart,
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
