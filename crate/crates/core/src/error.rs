use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    Shape {
        context: &'static str,
        expected: String,
        actual: String,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("non-finite loss at epoch {epoch} (batch {batch}): {value}")]
    NonFiniteLoss { epoch: usize, batch: usize, value: f64 },

    #[error("model file format error: {0}")]
    Format(String),

    #[error("truncated file: {0}")]
    Truncated(String),

    #[error("invalid value: {0}")]
    InvalidValue(String),

    #[error("unstable filter: {0}")]
    Unstable(String),

    #[error("zero variance in {side} dimension {dim}")]
    ZeroVariance { side: &'static str, dim: usize },

    #[error("{fraction:.4} of samples clipped (limit 0.01)")]
    Clipping { fraction: f64 },

    #[error("missing metadata in {path}: {what}")]
    Metadata { path: PathBuf, what: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
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

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
