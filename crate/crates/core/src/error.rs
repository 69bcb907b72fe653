use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the fitting pipeline.
#[derive(Debug, Error)]
pub enum WsfError {
    #[error("point set is empty")]
    EmptyPointSet,

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("points {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },

    #[error("only the 2-sphere is supported here (got S^{0})")]
    UnsupportedDimension(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("matrix is not symmetric (asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is numerically singular (smallest eigenvalue {sigma_min:.3e})")]
    Singular { sigma_min: f64 },

    #[error("point set is not a spherical {t}-design (exactness residual {residual:.3e})")]
    NotADesign { t: usize, residual: f64 },

    #[error("no positive quadrature rule of degree {degree}: residual {residual:.3e}")]
    InfeasibleDegree { degree: usize, residual: f64 },

    #[error("quadrature rule and data use different point sets")]
    PointSetMismatch,

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("noise-free values are not available for this data set")]
    MissingCleanValues,

    #[error("every candidate parameter failed to fit")]
    AllCandidatesFailed,
}

impl WsfError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        WsfError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        WsfError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = WsfError> = std::result::Result<T, E>;
