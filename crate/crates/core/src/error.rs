use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sparsity {sparsity} for a {n_rows}x{n_cols} layer: {reason}")]
    InvalidSparsity {
        sparsity: f64,
        n_rows: usize,
        n_cols: usize,
        reason: &'static str,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    /// Activations were produced for a different pair of layers.
    #[error("stale activations: {0}")]
    State(String),

    #[error("non-finite gradient {value} at edge ({row}, {col})")]
    NonFiniteGradient { row: usize, col: usize, value: f64 },

    #[error("cannot grow {requested} edges: only {vacant} vacant positions")]
    Capacity { requested: usize, vacant: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: loss = {loss}")]
    Divergence { epoch: usize, batch: usize, loss: f64 },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
