use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("unsupported dimension {got}: {what}")]
    UnsupportedDimension { got: usize, what: &'static str },

    #[error("invalid input: {0}")]
    Input(String),

    #[error("degenerate decision boundary: classifier weight vector is zero")]
    DegenerateBoundary,

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("parse error in {file} at row {row}, column {column}: {message}")]
    Parse {
        file: String,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Broad failure class, used by front ends to pick an exit status.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Dimension { .. }
            | Error::UnsupportedDimension { .. }
            | Error::Input(_)
            | Error::Parse { .. }
            | Error::Format(_) => ErrorKind::Input,
            Error::DegenerateBoundary | Error::DegenerateSignal(_) | Error::NonFinite(_) => {
                ErrorKind::Numeric
            }
            Error::Io { .. } => ErrorKind::Io,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Input,
    Numeric,
    Io,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension { expected, got })
    }
}
