use std::path::PathBuf;

/// Errors produced anywhere in the detector pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not positive definite after regularization{}", component_suffix(*.component))]
    SingularMatrix { component: Option<usize> },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid gaussian mixture: {0}")]
    InvalidGmm(String),

    #[error("numeric overflow: {0}")]
    Overflow(String),

    #[error("training diverged at epoch {epoch}, batch {batch} (last good epoch: {last_good_epoch:?})")]
    Diverged {
        epoch: usize,
        batch: usize,
        last_good_epoch: Option<usize>,
    },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema mismatch: model expects {expected}, input has {actual}")]
    SchemaMismatch { expected: String, actual: String },

    #[error("unknown category {value:?} for feature {feature:?}")]
    UnknownCategory { feature: String, value: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn component_suffix(component: Option<usize>) -> String {
    match component {
        Some(k) => format!(" (component {k})"),
        None => String::new(),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
