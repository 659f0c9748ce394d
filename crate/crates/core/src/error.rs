use std::path::PathBuf;

use thiserror::Error;

use crate::geometry::DistancePair;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad class of a failure, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid window: {0}")]
    InvalidWindow(String),

    #[error("non-finite coordinate in point {index}")]
    NonFiniteCoordinate { index: usize },

    #[error("point {index} at ({x}, {y}, {t}) lies outside the window")]
    PointOutsideWindow { index: usize, x: f64, y: f64, t: f64 },

    #[error("points {first} and {second} are identical")]
    DuplicatePoint { first: usize, second: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid covariate stack: {0}")]
    InvalidCovariates(String),

    #[error("covariate `{name}` is undefined at ({x}, {y}, {t})")]
    CovariateUndefined { name: String, x: f64, y: f64, t: f64 },

    #[error("model is not locally stable: {0}")]
    NotLocallyStable(String),

    #[error("rate {rate} exceeds the dominating bound {bound} at ({x}, {y}, {t})")]
    RateBoundViolated {
        rate: f64,
        bound: f64,
        x: f64,
        y: f64,
        t: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate logistic fit: {0}")]
    DegenerateFit(String),

    #[error("collinear design columns: {}", .0.join(", "))]
    CollinearColumns(Vec<String>),

    #[error("hardcore ({hs}, {ht}) is infeasible: {} observed pair(s) inside the hardcore cylinder", .violating.len())]
    InfeasibleHardcore {
        hs: f64,
        ht: f64,
        violating: Vec<DistancePair>,
    },

    #[error("invalid lag grid: {0}")]
    InvalidGrid(String),

    #[error("need at least {required} simulations for level {level}, got {actual}")]
    TooFewSimulations { level: f64, required: usize, actual: usize },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("{}:{line}: duplicate point, first seen on line {first_line}", .path.display())]
    DuplicateRow {
        path: PathBuf,
        line: usize,
        first_line: usize,
    },

    #[error("{}:{line}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidWindow(_)
            | Error::InvalidModel(_)
            | Error::InvalidCovariates(_)
            | Error::NotLocallyStable(_)
            | Error::InvalidConfig(_)
            | Error::InvalidGrid(_)
            | Error::TooFewSimulations { .. }
            | Error::InfeasibleHardcore { .. } => ErrorKind::Config,
            Error::NonFiniteCoordinate { .. }
            | Error::PointOutsideWindow { .. }
            | Error::DuplicatePoint { .. }
            | Error::CovariateUndefined { .. }
            | Error::LengthMismatch { .. }
            | Error::DuplicateRow { .. }
            | Error::Parse { .. }
            | Error::Io { .. } => ErrorKind::Data,
            Error::RateBoundViolated { .. } | Error::DegenerateFit(_) | Error::CollinearColumns(_) => {
                ErrorKind::Numerical
            }
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
