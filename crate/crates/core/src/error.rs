use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("empty file: {0}")]
    EmptyFile(PathBuf),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("unparseable cell at row {row}, column `{column}`: {value:?}")]
    BadCell {
        row: usize,
        column: String,
        value: String,
    },

    #[error("label out of range at row {row}: {label}")]
    LabelOutOfRange { row: usize, label: i64 },

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("beta {beta} outside the open interval (0, {classes})")]
    BetaOutOfRange { beta: f64, classes: usize },

    #[error("non-finite score encountered")]
    NonFiniteScore,

    #[error("non-finite objective at iteration {iteration}")]
    NonFiniteRisk { iteration: usize },

    #[error("no admissible calibration threshold for level {0}")]
    NoAdmissibleThreshold(f64),

    #[error("bisection did not converge: {0}")]
    NoConvergence(String),

    #[error("model file version mismatch: found {found:?}, expected {expected:?}")]
    VersionMismatch { found: String, expected: String },

    #[error("corrupted model document: {0}")]
    Corrupted(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors caused by bad user input rather than runtime failure.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io { .. }
                | Error::NonFiniteRisk { .. }
                | Error::NonFiniteScore
                | Error::NoConvergence(_)
        )
    }
}
