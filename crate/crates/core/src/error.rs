use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("zero-variance instances under correlation distance: {}", ids.join(", "))]
    ZeroVariance { ids: Vec<String> },

    #[error("unknown class `{0}`")]
    UnknownClass(String),

    #[error("class `{0}` is not testable (mega-class or fewer than two members)")]
    ClassNotTestable(String),

    #[error("estimation impossible for class `{class}`: {reason}")]
    EstimationImpossible { class: String, reason: String },

    #[error("{0} instances exceed the dense distance-matrix ceiling of {max}", max = crate::data::MAX_INSTANCES)]
    TooLarge(usize),

    #[error("distance matrix invalid: {0}")]
    InvalidDistances(String),

    #[error("binomial domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("report schema mismatch: expected {expected}, found {found}")]
    Schema { expected: String, found: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for failures of the environment (files, streams) rather than of
    /// the data or configuration.
    pub fn is_io(&self) -> bool {
        match self {
            Error::Io { .. } => true,
            Error::Csv(e) => e.is_io_error(),
            _ => false,
        }
    }
}
