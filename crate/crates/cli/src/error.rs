use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Env(#[from] tpa_env::EnvError),
    #[error(transparent)]
    Grid(#[from] tpa_grid::GridError),
    #[error(transparent)]
    Marl(#[from] tpa_marl::MarlError),
    #[error(transparent)]
    Agent(#[from] tpa_agent::AgentError),
    #[error(transparent)]
    Nn(#[from] tpa_nn::NnError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CliError {
    /// Exit code: 2 for validation/config trouble, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Validation(_) => 2,
            CliError::Env(tpa_env::EnvError::Grid(_)) => 3,
            CliError::Env(e) => match e {
                tpa_env::EnvError::ParseCsv { .. }
                | tpa_env::EnvError::Length { .. }
                | tpa_env::EnvError::Split { .. }
                | tpa_env::EnvError::CursorRange { .. }
                | tpa_env::EnvError::BadParams(_) => 2,
                _ => 3,
            },
            CliError::Grid(e) => match e {
                tpa_grid::GridError::UnknownFields { .. }
                | tpa_grid::GridError::Parse { .. } => 2,
                _ => 3,
            },
            CliError::Marl(tpa_marl::MarlError::Incompatible(_)) => 2,
            CliError::Marl(tpa_marl::MarlError::Config(_)) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
