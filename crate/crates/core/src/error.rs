use alloc::string::String;
use alloc::vec::Vec;

/// Errors raised by the core algorithms.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{requested} qubits exceeds the statevector cap of {cap}")]
    QubitCapExceeded { requested: usize, cap: usize },
    #[error("insufficient samples for class {class}: need {needed}, have {available}")]
    InsufficientSamples {
        class: u32,
        needed: usize,
        available: usize,
    },
    #[error("labels contain a single class")]
    SingleClass,
    #[error("matrix is not symmetric (max deviation {0:e})")]
    NotSymmetric(f64),
    #[error("matrix is not positive semi-definite (min eigenvalue {0:e})")]
    NotPositiveSemiDefinite(f64),
    #[error("matrix is singular")]
    Singular,
    #[error("internal numerical inconsistency: {0}")]
    Numerical(String),
    #[error("solver did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error("objective failed at {params:?}: {message}")]
    Objective { params: Vec<f64>, message: String },
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
