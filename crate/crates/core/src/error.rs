use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is not Hermitian (max |m - m^dagger| = {0:e})")]
    NotHermitian(f64),
    #[error("invalid state: {0}")]
    Validation(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("measure `{name}` rejected: {reason}")]
    MeasureRejected { name: String, reason: String },
    #[error("evaluation of `{name}` failed: {reason}")]
    Evaluation { name: String, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
