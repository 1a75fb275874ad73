use thiserror::Error;

use crate::model::ChannelKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpoError {
    #[error("pump amplitude at or above threshold (normalized excitation {0})")]
    AboveThreshold(f64),
    #[error("non-positive rate: {0}")]
    NonPositiveRate(&'static str),
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("operation requires a tuned device (psi = psi0 = 0, real kappa0)")]
    NotTuned,
    #[error("zero pump: normalized excitation must be positive")]
    ZeroPump,
    #[error("channel {0:?} is not supported by this operation")]
    UnsupportedChannel(ChannelKind),
    #[error("degenerate poles: {0}")]
    DegeneratePole(String),
    #[error("quadrature did not converge (estimated error {error:e}, value {value:e})")]
    QuadratureFailure { value: f64, error: f64 },
    #[error("trajectory too short: {0}")]
    TrajectoryTooShort(String),
    #[error("degenerate variance in kurtosis estimate (m2 = {0:e})")]
    DegenerateVariance(f64),
    #[error("fit did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("parse error at line {line}, column {column}: {message}")]
    ParseError {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, OpoError>;

impl From<std::io::Error> for OpoError {
    fn from(e: std::io::Error) -> Self {
        OpoError::Io(e.to_string())
    }
}
