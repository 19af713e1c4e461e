use thiserror::Error;

use crate::kernel::Witness;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed kernel: {0}")]
    MalformedKernel(String),

    #[error("kernel is not in the positive class: min eigenvalue {min_eigenvalue:e} below threshold {threshold:e}")]
    NotPositive {
        min_eigenvalue: f64,
        threshold: f64,
        witness: Box<Witness>,
    },

    #[error("K is not dominated by L: min eigenvalue of L-K is {min_eigenvalue:e} (threshold {threshold:e})")]
    NotDominated {
        min_eigenvalue: f64,
        threshold: f64,
        witness: Box<Witness>,
    },

    #[error("ill-conditioned instance: representation residual {residual:e} exceeds {threshold:e}")]
    IllConditioned { residual: f64, threshold: f64 },

    #[error("contraction violation: eigenvalue {eigenvalue:e} of the derivative lies outside [-tol, 1+tol]")]
    ContractionViolation { eigenvalue: f64 },

    #[error("certificate invalid: {what} residual {residual:e} exceeds {threshold:e}")]
    CertificateInvalid {
        what: &'static str,
        residual: f64,
        threshold: f64,
    },

    #[error("inconsistency: {0}")]
    Inconsistency(String),

    #[error("invalid effect: eigenvalue {eigenvalue:e} below -tol")]
    InvalidEffect { eigenvalue: f64 },

    #[error("effect does not commute with the representation: residual {residual:e} exceeds {threshold:e}")]
    NonCommutingEffect { residual: f64, threshold: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
