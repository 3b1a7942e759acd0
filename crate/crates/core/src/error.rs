use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate post id `{0}`")]
    DuplicateId(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("post `{0}` has no label")]
    Unlabeled(String),

    #[error("class {label} has {count} post(s); stratified split needs at least 2")]
    ClassTooSmall { label: crate::Label, count: usize },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid lexicon entry: {0}")]
    Lexicon(String),

    #[error("invalid ingest configuration: {0}")]
    IngestConfig(String),

    #[error("authentication failed: {0}")]
    Auth(String),

    #[error("request failed after {attempts} attempt(s), last HTTP status {status}")]
    RetryExhausted { attempts: u32, status: u16 },

    #[error("http error: {0}")]
    Http(String),

    #[error("{0}")]
    EmptyInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("training needs at least two classes, found {0}")]
    SingleClass(usize),

    #[error("invalid parameter `{name}`: {message}")]
    Param { name: String, message: String },

    #[error("incomplete annotation: item `{item}` missing a vote from {annotator}")]
    IncompleteAnnotation { item: String, annotator: String },

    #[error("model blob: {0}")]
    ModelBlob(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn record(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Record {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by bad input data rather than a failed computation.
    pub fn is_data_error(&self) -> bool {
        !matches!(
            self,
            Error::SingleClass(_) | Error::RetryExhausted { .. } | Error::Http(_) | Error::Auth(_)
        )
    }
}
