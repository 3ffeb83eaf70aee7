use thiserror::Error;

/// Failure classes, each with its own process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, configuration or missing resources.
    #[error("{0}")]
    Validation(String),
    /// The computation itself failed (instability, non-convergence).
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
        }
    }
}

impl From<fene_core::Error> for CliError {
    fn from(e: fene_core::Error) -> Self {
        use fene_core::Error as E;
        match e {
            E::InvalidParameter(_) | E::Inadmissible(_) | E::Format(_) | E::Io(_) | E::Json(_) => {
                CliError::Validation(e.to_string())
            }
            E::Quadrature(_) | E::Singular(_) | E::Unstable { .. } | E::NoConvergence { .. } | E::Budget(_) => {
                CliError::Numerical(e.to_string())
            }
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Validation(format!("i/o error: {e}"))
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}
