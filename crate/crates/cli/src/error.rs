use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] hilbert_ts::Error),

    #[error("{path}: {message}")]
    Io { path: String, message: String },

    #[error("{0}")]
    Assertion(String),
}

impl CliError {
    pub fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.display().to_string(), message: err.to_string() }
    }

    /// 2 validation, 3 failed `--assert`, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Core(hilbert_ts::Error::Serialization(_)) => 4,
            CliError::Core(_) => 2,
            CliError::Assertion(_) => 3,
            CliError::Io { .. } => 4,
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
