use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] gazefusion_core::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("mode error: {0}")]
    Mode(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
    #[error("unknown parameter group: {0}")]
    UnknownGroup(String),
}
