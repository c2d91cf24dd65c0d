use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid multiset index: {0}")]
    InvalidIndex(String),

    #[error("degree {degree} exceeds the supported maximum {max}")]
    DegreeOverflow { degree: usize, max: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("interpolation matrix is ill-conditioned (min eigenvalue {min_eigenvalue:e})")]
    IllConditioned { min_eigenvalue: f64 },

    #[error("value {value} at sample {index} is negative")]
    NegativeValue { index: usize, value: f64 },

    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    IterationCap { iterations: usize, estimate: f64 },

    #[error("matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e}, tolerance {tolerance:e})")]
    NotPsd { min_eigenvalue: f64, tolerance: f64 },

    #[error("certificate does not refute f (pseudo-expectation is not negative)")]
    NotRefuted,

    #[error("xor closure ended in a contradiction")]
    Contradiction,

    #[error("problem too large for dense projections: {0}")]
    TooLarge(String),

    #[error("schema violation: {0}")]
    Schema(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Schema(e.to_string())
    }
}
