use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments, configuration, or input files (exit code 2).
    #[error("{0}")]
    Usage(String),

    /// Failure while running an otherwise valid request (exit code 1).
    #[error("{0}")]
    Runtime(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Runtime(_) => 1,
            CliError::Usage(_) | CliError::Io { .. } => 2,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<wast_core::Error> for CliError {
    fn from(e: wast_core::Error) -> Self {
        use wast_core::Error as E;
        match e {
            E::Config(_) | E::Parse { .. } | E::Io { .. } | E::Input(_) | E::InvalidSparsity { .. } => {
                CliError::Usage(e.to_string())
            }
            _ => CliError::Runtime(e.to_string()),
        }
    }
}
