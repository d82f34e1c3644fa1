use std::path::PathBuf;

use thiserror::Error;

/// Command failure, mapped onto the process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{path}: {message}")]
    Input { path: PathBuf, message: String },

    #[error("{0}")]
    Numerical(rasch_gauss::Error),

    #[error("{0} check(s) violated")]
    Violated(usize),

    #[error("{0} check(s) inconclusive after a numerical or budget failure")]
    Inconclusive(usize),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Violated(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Io { .. } | CliError::Input { .. } => 3,
            CliError::Numerical(_) | CliError::Inconclusive(_) => 4,
        }
    }
}

impl From<rasch_gauss::Error> for CliError {
    fn from(e: rasch_gauss::Error) -> Self {
        match e {
            rasch_gauss::Error::InvalidInput(msg) => CliError::Usage(msg),
            other => CliError::Numerical(other),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
