use std::path::Path;

use thiserror::Error;

/// Failure categories, each with its own exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Output(_) => 1,
        }
    }

    pub fn at(path: &Path, line: usize, msg: impl std::fmt::Display) -> Self {
        CliError::Input(format!("{}:{line}: {msg}", path.display()))
    }

    pub fn write(path: &Path, err: impl std::fmt::Display) -> Self {
        CliError::Output(format!("cannot write {}: {err}", path.display()))
    }
}

impl From<pota_core::Error> for CliError {
    fn from(e: pota_core::Error) -> Self {
        match e {
            pota_core::Error::Numeric(_) => CliError::Solver(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
