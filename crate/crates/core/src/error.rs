use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a precondition (bad file, bad column, too short).
    #[error("data error: {0}")]
    Data(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A recursion or loss produced a non-finite or out-of-domain value.
    #[error("numerical failure at index {index}: {message}")]
    Numerical { index: usize, message: String },

    #[error("domain error in {op}: input {value}")]
    Domain { op: &'static str, value: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn params(msg: impl Into<String>) -> Self {
        Error::InvalidParams(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn numerical(index: usize, msg: impl Into<String>) -> Self {
        Error::Numerical {
            index,
            message: msg.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Data(_) | Error::Io { .. } | Error::Csv(_) | Error::InvalidParams(_) => 2,
            Error::Numerical { .. } | Error::Domain { .. } => 3,
        }
    }
}
