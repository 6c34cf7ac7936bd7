use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension must be even (got {width}x{height})")]
    OddDimension { width: usize, height: usize },
    #[error("roi too small ({width}x{height}, need at least 3x3)")]
    RoiTooSmall { width: usize, height: usize },
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("only stretching is defined (target length {target} < signature length {len})")]
    ShrinkNotSupported { len: usize, target: usize },
    #[error("record for speaker '{0}' has no calibrated threshold")]
    Uncalibrated(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("corpus is missing {0}")]
    MissingData(String),
    #[error("malformed {what} at {location}: {reason}")]
    Parse {
        what: &'static str,
        location: String,
        reason: String,
    },
    #[error("store: {0}")]
    Store(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(
        what: &'static str,
        location: impl Into<String>,
        reason: impl Into<String>,
    ) -> Self {
        Error::Parse {
            what,
            location: location.into(),
            reason: reason.into(),
        }
    }
}
