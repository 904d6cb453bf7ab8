use thiserror::Error;

/// Errors raised by the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("operands are defined on different quadratures")]
    QuadratureMismatch,

    #[error("invalid quadrature: {0}")]
    InvalidQuadrature(String),

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("panel must be centered before estimating autocovariances")]
    NotCentered,

    #[error("insufficient sample for lag {lag}: n = {n}")]
    InsufficientSample { n: usize, lag: usize },

    #[error("kernel is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("operator is not positive semidefinite (eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("vectors are not orthonormal (max Gram deviation {0:e})")]
    NotOrthonormal(f64),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    InvalidSpec(String),

    #[error("{failed} of {total} replicates failed (limit 1%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("serialization failed: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;
