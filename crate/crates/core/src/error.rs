use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the null-model pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("failed to decode image {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("corpus root {0} does not exist or is not a directory")]
    MissingRoot(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("image {width}x{height} is too small, need at least {min}x{min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },

    #[error("point ({x}, {y}) is too close to the border for a {size}x{size} window")]
    OutOfBounds { x: f64, y: f64, size: usize },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("requested {k} clusters but only {distinct} distinct feature vectors are available")]
    TooFewPoints { k: usize, distinct: usize },

    #[error("cluster {0} is empty")]
    EmptyCluster(usize),

    #[error("bad file format: {0}")]
    Format(String),

    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("file truncated: {0}")]
    Truncated(String),

    #[error("no valid sample points: {0}")]
    NoValidPoints(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
