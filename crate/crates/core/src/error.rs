use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("state transition matrix is not strictly stable")]
    Unstable,

    #[error(
        "Riccati iteration did not converge after {iterations} iterations (residual {residual:e})"
    )]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("replay attack started before its capture window was recorded ({recorded} of {needed} samples)")]
    ReplayNotReady { recorded: usize, needed: usize },

    #[error("i/o error on grid cache: {0}")]
    Io(String),

    #[error("malformed grid cache: {0}")]
    GridCache(String),
}

pub type Result<T> = std::result::Result<T, Error>;
