use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] gazefusion_core::Error),
    #[error(transparent)]
    Preprocess(#[from] gazefusion_preprocess::Error),
    #[error(transparent)]
    Model(#[from] gazefusion_model::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("config error: {0}")]
    Config(String),
    #[error("transfer error: {0}")]
    Transfer(String),
    #[error("non-finite loss in {stage} at epoch {epoch}, batch {batch}: {detail}")]
    NonFinite { stage: String, epoch: usize, batch: usize, detail: String },
    #[error("evaluation error: {0}")]
    Eval(String),
}
