use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the transop library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value encountered (input norm {norm:e})")]
    NonFinite { norm: f64 },

    #[error("objective diverged at iteration {iteration} (value {value:e})")]
    Divergent { iteration: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("eigenvalue iteration did not converge (dimension {dim}, norm {norm:e})")]
    ConvergenceFailure { dim: usize, norm: f64 },

    #[error("invalid scale {0}: scales must be positive and finite")]
    InvalidScale(f64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("training diverged at step {step}: operator magnitude {magnitude:e}")]
    Diverged { step: usize, magnitude: f64 },

    #[error("feature rows ({features}) do not match point count ({points})")]
    FeatureMismatch { features: usize, points: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("degenerate labels: {0}")]
    DegenerateLabels(String),

    #[error("point {0} has no label")]
    UnlabeledPoint(usize),

    #[error("class {0} has no points")]
    EmptyClass(usize),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("pair {index}: {source}")]
    Pair {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn at_pair(self, index: usize) -> Self {
        Error::Pair {
            index,
            source: Box::new(self),
        }
    }
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
