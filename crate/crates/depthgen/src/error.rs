use thiserror::Error;

#[derive(Debug, Error)]
pub enum DepthError {
    #[error(transparent)]
    Nn(#[from] nncore::NnError),
    #[error(transparent)]
    Sim(#[from] simworld::SimError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("training diverged at epoch {epoch}: {what}")]
    Diverged { epoch: usize, what: String },
}

pub type Result<T> = std::result::Result<T, DepthError>;
