use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Tensor shapes or indices do not line up. The message names the coordinates.
    #[error("structural error: {0}")]
    Structure(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A computation would exceed its enumeration budget.
    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("bisection bracket failure: lo={lo}, hi={hi}: {reason}")]
    Bracket { lo: f64, hi: f64, reason: String },

    #[error("empty confidence set at round {round}")]
    EmptyConfidenceSet { round: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
