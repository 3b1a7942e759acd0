use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] candle_core::Error),

    #[error(transparent)]
    Data(#[from] sabia_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("training data: {0}")]
    Training(String),

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

    pub fn checkpoint(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Checkpoint {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True when the failure comes from bad input rather than the model.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Data(e) => e.is_data_error(),
            Error::Io { .. } | Error::Checkpoint { .. } | Error::Json(_) | Error::Training(_) | Error::Config(_) => true,
            Error::Tensor(_) => false,
        }
    }
}
