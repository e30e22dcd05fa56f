use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the fieldgrid library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no background reference: mask has no background pixel")]
    NoBackgroundReference,

    #[error("unknown field id {0}")]
    UnknownField(u32),

    #[error("undefined 0/0: both vectors are all zero")]
    UndefinedRatio,

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("MCC undefined: reference contains a single class")]
    MccUndefined,

    #[error("no viable candidate: every threshold candidate extracted zero fields")]
    NoViableCandidate,

    #[error("uncovered pixels: {count} pixel(s) not covered by any window, first at (row {first_row}, col {first_col})")]
    UncoveredPixels {
        count: usize,
        first_row: usize,
        first_col: usize,
    },

    #[error("format error in {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("unknown format for {0}")]
    UnknownFormat(PathBuf),

    #[error("I/O error on {path}: {error}")]
    Io {
        path: PathBuf,
        error: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, error: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            error,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
