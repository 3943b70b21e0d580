use std::path::PathBuf;

use thiserror::Error;

/// Everything that can go wrong in the library.
#[derive(Debug, Error)]
pub enum LannError {
    #[error("invalid dimension: expected {expected}, got {got}")]
    InvalidDimension { expected: usize, got: usize },

    #[error("degenerate metric: all weights are zero")]
    DegenerateMetric,

    #[error("insufficient points: requested k = {k} but only {available} candidates")]
    InsufficientPoints { k: usize, available: usize },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparams(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("class {class} has {count} members, fewer than the {folds} folds requested")]
    ClassTooSmall { class: usize, count: usize, folds: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: String,
        message: String,
    },

    #[error("model file: {0}")]
    ModelFormat(String),
}

pub type Result<T> = std::result::Result<T, LannError>;

impl LannError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        LannError::Io {
            path: path.into(),
            source,
        }
    }
}
