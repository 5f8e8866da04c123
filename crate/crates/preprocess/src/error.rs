use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] gazefusion_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("quality error: only {valid_fraction:.3} of samples are valid (need {required:.2})")]
    Quality { valid_fraction: f64, required: f64 },
    #[error("non-finite value in input window")]
    NonFinite,
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("alignment error: {0}")]
    Alignment(String),
    #[error("label error: {0}")]
    Labels(String),
}
