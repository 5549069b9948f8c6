use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("missing value at row {row}, column {column}")]
    MissingValue { row: usize, column: String },

    #[error("non-numeric value {value:?} at row {row}, column {column}")]
    NonNumeric {
        row: usize,
        column: String,
        value: String,
    },

    #[error("target column {0:?} not found in header")]
    MissingTarget(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("duplicate column name after sanitizing: {0:?}")]
    DuplicateColumn(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("scaler is not fitted: {0}")]
    Unfitted(String),

    #[error("unknown scaler {0:?}")]
    UnknownScaler(String),

    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),

    #[error("task mismatch: {0}")]
    TaskMismatch(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("model not implemented: {0:?} is outside the supported model set (KNN, LinReg, LogReg, GaussianNB, CART, RF, MLP)")]
    ModelNotImplemented(String),

    #[error("unknown model {0:?}")]
    UnknownModel(String),

    #[error("undefined R² for constant target")]
    ConstantTarget,

    #[error("invalid config: {0}")]
    Config(String),

    #[error("statistical test: {0}")]
    Stats(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line front end: 2 for I/O
    /// failures, 1 for everything else (bad config, bad input).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 2,
            _ => 1,
        }
    }
}
