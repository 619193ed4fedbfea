use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("matrix is rank deficient (smallest singular value {smallest_singular_value:.3e})")]
    RankDeficient { smallest_singular_value: f64 },

    #[error("labels must be -1 or +1, found {0}")]
    LabelDomain(f64),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("expected at most two classes, found {0}")]
    UnsupportedLabels(usize),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("trace too short for rate classification: {0}")]
    InsufficientData(String),

    #[error("iterate snapshots are required for contraction diagnostics")]
    SnapshotsRequired,

    #[error("reference Newton run stopped at gradient norm {grad_norm:.3e} after {iterations} iterations")]
    ReferenceNotConverged { grad_norm: f64, iterations: usize },

    #[error("io error: {0}")]
    Io(String),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
