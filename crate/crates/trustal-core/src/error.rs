//! Crate-wide error type.

use crate::data::SampleId;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("acquisition error: id {0} is not in the unlabeled pool")]
    Acquisition(SampleId),

    #[error("budget {requested} exceeds unlabeled pool size {available}")]
    Budget { requested: usize, available: usize },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("generation index {0} out of range")]
    Generation(usize),

    #[error("teacher selection error: {0}")]
    Selection(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("analysis error: {0}")]
    Analysis(String),

    #[error("comparison error: {0}")]
    Comparison(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}
