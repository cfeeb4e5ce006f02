use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// The file does not follow the declared layout (bad magic, truncated block, bad header).
    #[error("format error: {0}")]
    Format(String),

    /// The content parsed but violates a data invariant (non-finite value, duplicate id, ...).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("parameter error: {0}")]
    Parameter(String),

    /// An id referenced by one input is missing from another.
    #[error("join error: item `{item}` not found in {source_name}")]
    Join { item: String, source_name: String },

    #[error("undefined similarity: {0}")]
    UndefinedSimilarity(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("fit diverged at epoch {epoch} (last finite train loss {last_finite_loss:?} at epoch {last_finite_epoch:?})")]
    Diverged {
        epoch: usize,
        last_finite_epoch: Option<usize>,
        last_finite_loss: Option<f64>,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
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

pub type Result<T> = std::result::Result<T, Error>;
