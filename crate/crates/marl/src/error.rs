use thiserror::Error;

#[derive(Debug, Error)]
pub enum MarlError {
    #[error("batch size {batch} exceeds buffer fill {fill}")]
    Sampling { batch: usize, fill: usize },
    #[error("non-finite {what} at epoch {epoch} step {step}: {detail}")]
    NonFinite { what: &'static str, epoch: usize, step: usize, detail: String },
    #[error("checkpoint incompatible: {0}")]
    Incompatible(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] tpa_env::EnvError),
    #[error(transparent)]
    Agent(#[from] tpa_agent::AgentError),
    #[error(transparent)]
    Nn(#[from] tpa_nn::NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MarlError>;
