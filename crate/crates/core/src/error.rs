use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training failed: {0}")]
    Training(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("evaluation failed: {0}")]
    Evaluation(String),

    #[error("{path}: line {line}: {message}")]
    Parse { path: PathBuf, line: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
