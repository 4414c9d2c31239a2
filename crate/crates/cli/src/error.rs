use std::process::ExitCode;

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("config hash mismatch in {file}: expected {expected}, found {found}")]
    HashMismatch {
        file: String,
        expected: String,
        found: String,
    },

    #[error(transparent)]
    Core(#[from] nphmm::Error),

    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Validation(_) | CliError::HashMismatch { .. } => ExitCode::from(2),
            CliError::Core(e) if e.is_numerical() => ExitCode::from(3),
            CliError::Core(_) => ExitCode::from(2),
            CliError::Io { .. } => ExitCode::from(1),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Validation(format!("malformed CSV: {e}"))
    }
}
