use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Sim(#[from] simworld::SimError),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("step called on a finished episode")]
    EpisodeDone,
    #[error("step called before reset")]
    NotReset,
    #[error("bad snapshot: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, EnvError>;
