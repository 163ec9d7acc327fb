//! Error type shared by every module of the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{what} = {value} lies outside the domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: String,
    },

    #[error("case {case}: b = {b} violates admissibility ({condition})")]
    Admissibility {
        case: &'static str,
        b: f64,
        condition: String,
    },

    #[error("case {case}: barrier range [{lower}, ..) leaves the domain of Z ({domain})")]
    ZDomain {
        case: &'static str,
        lower: f64,
        domain: String,
    },

    #[error("minimum principle requires finite lower spectral bound ({0})")]
    UnboundedLowerSpectrum(String),

    #[error("upper spectral bound is infinite; boundedness of the operator fails")]
    UnboundedUpperSpectrum,

    #[error("root bracket failure: {0}")]
    Bracket(String),

    #[error("CFL violation: dt = {dt} exceeds stable limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("non-finite value produced at step {step}")]
    Blowup { step: usize },

    #[error("configuration error in `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
