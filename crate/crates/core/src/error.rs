use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = StackError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum StackError {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value at row {row}, col {col}")]
    NonFinite { row: usize, col: usize },

    #[error("label {label} at row {row} outside declared class range 0..{num_classes}")]
    LabelOutOfRange {
        row: usize,
        label: String,
        num_classes: usize,
    },

    #[error("budget exhausted: {0}")]
    Budget(String),

    #[error("combinatorial budget exceeded: C({n}, {k}) > {limit}")]
    Combinatorial { n: usize, k: usize, limit: u64 },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(String),

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl StackError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        StackError::Invalid(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        StackError::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        StackError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by user input rather than the environment.
    pub fn is_validation(&self) -> bool {
        !matches!(self, StackError::Io { .. } | StackError::Budget(_))
    }
}
