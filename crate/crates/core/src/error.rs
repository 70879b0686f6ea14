//! Error type shared across the library.

use std::path::PathBuf;

/// Errors produced by synthesis, retrieval, and persistence operations.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument violated a precondition.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Two rasters or stacks that must share dimensions do not.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Fewer samples than unknowns were offered to a solver.
    #[error("underdetermined system: need at least {needed} samples, got {got}")]
    Underdetermined { needed: usize, got: usize },

    /// A retrieval method was asked to run on a schedule it does not support.
    #[error("unsupported schedule: {0}")]
    UnsupportedSchedule(String),

    /// An operation that needs at least one usable pixel received none.
    #[error("empty domain: {0}")]
    EmptyDomain(String),

    /// A file could not be read or parsed; the path names the offender.
    #[error("failed to load {path}: {reason}")]
    Load { path: PathBuf, reason: String },

    /// An I/O failure while writing artifacts.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn load(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Load {
            path: path.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
