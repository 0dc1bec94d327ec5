use std::path::PathBuf;

use ginidep_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Input(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("cannot serialize report: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// Process exit code: 2 for bad input, 3 when the data cannot support the
    /// requested statistic.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Infeasible(_) => 3,
            _ => 2,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidInput(_) => CliError::Input(e.to_string()),
            _ => CliError::Infeasible(e.to_string()),
        }
    }
}
