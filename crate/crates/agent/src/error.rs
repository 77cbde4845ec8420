use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid encoder config: {0}")]
    Config(String),
    #[error("observation layout mismatch: {0}")]
    Layout(String),
    #[error("prototype bank needs {needed} candidate days, profiles span {available}")]
    InsufficientDays { needed: usize, available: usize },
    #[error("bank dimension {bank} incompatible with encoder feature dimension {encoder}")]
    BankDim { bank: usize, encoder: usize },
    #[error(transparent)]
    Nn(#[from] tpa_nn::NnError),
}

pub type Result<T> = std::result::Result<T, AgentError>;
