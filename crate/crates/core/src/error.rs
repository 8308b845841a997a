use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("schema violation in record {record}: {message}")]
    Schema { record: usize, message: String },

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error("no positively contributing model: every fusion weight was eliminated")]
    NoPositiveModel,

    #[error("missing {0}")]
    Missing(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(
        context: &'static str,
        expected: impl ToString,
        actual: impl ToString,
    ) -> Self {
        Error::Shape {
            context,
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable, machine-readable identifier of the error category.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape { .. } => "shape_mismatch",
            Error::InvalidInput(_) => "invalid_input",
            Error::NonFinite(_) => "non_finite",
            Error::Schema { .. } => "schema_violation",
            Error::Checkpoint(_) => "checkpoint_mismatch",
            Error::NoPositiveModel => "no_positive_model",
            Error::Missing(_) => "missing",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }
}
