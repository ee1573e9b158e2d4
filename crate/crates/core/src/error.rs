use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the estimation pipeline.
///
/// Variants fall into two families that the command-line front end maps to
/// distinct exit codes: invalid arguments/configuration ([`Error::is_validation`])
/// and problems with the data itself.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("spectral function is not finite at eigenvalue {eigenvalue} (index {index})")]
    SpectralDomain { index: usize, eigenvalue: f64 },

    #[error("diagonal entry {index} is not positive ({value})")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("determinant of the product is not positive")]
    NonPositiveDeterminant,

    #[error("need at least {needed} null variants, got {found}")]
    InsufficientNulls { needed: usize, found: usize },

    #[error("panel too small: {0}")]
    PanelTooSmall(String),

    #[error("trait '{0}' has a constant column")]
    DegenerateColumn(String),

    #[error("trait '{0}' has an all-zero column; reliability ratio undefined")]
    UndefinedRatio(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}: missing required column '{column}'")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("no variants shared by all traits")]
    EmptyIntersection,

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by invalid arguments rather than bad data.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::InvalidParameter(_) => true,
            Error::Stage { source, .. } => source.is_validation(),
            _ => false,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
