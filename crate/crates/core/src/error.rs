use thiserror::Error;

/// Errors raised by the solver, the closure models and the file formats.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("numerical instability at step {step}: {reason}")]
    Unstable { step: usize, reason: String },

    #[error("iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("inadmissible conformation tensor: {0}")]
    Inadmissible(String),

    #[error("wall-clock budget exceeded: {0}")]
    Budget(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
