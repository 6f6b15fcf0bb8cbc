use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// A file was readable but its contents are not what we accept.
    #[error("format error in field `{field}`: {detail}")]
    Format { field: &'static str, detail: String },

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("shape mismatch on {axis} axis: expected {expected}, got {actual}")]
    ShapeMismatch {
        axis: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(field: &'static str, detail: impl Into<String>) -> Self {
        Error::Format {
            field,
            detail: detail.into(),
        }
    }

    pub(crate) fn shape(axis: &'static str, expected: usize, actual: usize) -> Self {
        Error::ShapeMismatch {
            axis,
            expected,
            actual,
        }
    }

    /// Process exit code used by the command-line runner: 3 for I/O, 2 for
    /// everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            _ => 2,
        }
    }
}
