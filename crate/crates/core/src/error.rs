use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed document: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: validation failed: {message}")]
    Validation { path: PathBuf, message: String },

    #[error("{0}: no frames found")]
    NoFrames(PathBuf),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid scene spec: {0}")]
    SceneSpec(String),

    #[error("evaluation input mismatch: {0}")]
    Eval(String),

    #[error("export: {0}")]
    Export(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn validation(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Validation {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
