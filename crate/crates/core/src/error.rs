use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the analysis library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },

    #[error("parse error at row {row}, column {column}: cannot read {value:?} as a number")]
    Parse { row: usize, column: usize, value: String },

    #[error("trial {trial} spans {length} samples, shorter than one epoch of {epoch_length}")]
    Epoching {
        trial: usize,
        length: usize,
        epoch_length: usize,
    },

    #[error("filter design: {0}")]
    Design(String),

    #[error("length error: {0}")]
    Length(String),

    #[error("singular regressor matrix: {0}")]
    Singularity(String),

    #[error("degenerate signal: {0}")]
    DegenerateSignal(String),

    #[error("out of range: {0}")]
    Range(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unstable model: spectral radius {radius:.6} is not below 1")]
    Stability { radius: f64 },

    #[error("contract violation: {0}")]
    Contract(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by the filesystem rather than by the data.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $($arg:tt)+) => {
        if !($cond) {
            return Err($crate::error::Error::Contract(format!($($arg)+)));
        }
    };
}
pub(crate) use ensure;
