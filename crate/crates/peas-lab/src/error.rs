//! Library-wide error type.

use std::path::PathBuf;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: String,
        expected: String,
        actual: String,
    },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("ranking set is empty")]
    EmptyRankingSet,

    #[error("model zoo has {size} members, need at least {min} for role assignment")]
    ZooTooSmall { size: usize, min: usize },

    #[error("unknown architecture id {id:?}; valid ids: {valid}")]
    UnknownArchitecture { id: String, valid: String },

    #[error("model {arch} reached held-out accuracy {accuracy:.4}, below floor {floor:.4}")]
    AccuracyFloorUnmet {
        arch: String,
        accuracy: f64,
        floor: f64,
    },

    #[error("training diverged on {arch}: non-finite parameters after step")]
    TrainingDiverged { arch: String },

    #[error("parse error in {path} at byte {offset}: {message}")]
    Parse {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("checkpoint format version {found} unsupported (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("augmentation parameter out of preset range: {0}")]
    AugmentOutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config field {field:?}: {message}")]
    InvalidConfig { field: String, message: String },

    #[error("pool requested {requested} victim-correct samples but only {available} available")]
    PoolExhausted { requested: usize, available: usize },

    #[error("attack budget violated on ingestion: linf {linf:.6} > epsilon {epsilon:.6} + 1e-6")]
    BudgetViolation { linf: f64, epsilon: f64 },

    #[error("external attack failed: {0}")]
    ExternalAttack(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(String),
}

impl Error {
    pub(crate) fn shape(context: impl Into<String>, expected: impl Into<String>, actual: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            context: context.into(),
            expected: expected.into(),
            actual: actual.into(),
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
