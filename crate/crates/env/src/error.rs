use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid generator parameter: {0}")]
    BadParams(String),
    #[error("profile csv {path} line {line}: {detail}")]
    ParseCsv { path: String, line: usize, detail: String },
    #[error("profile length mismatch: expected {expected} rows, found {found}")]
    Length { expected: usize, found: usize },
    #[error("profile horizon {horizon} days cannot host the requested split: {detail}")]
    Split { horizon: usize, detail: String },
    #[error("cursor day {day} outside profile horizon of {horizon} days")]
    CursorRange { day: usize, horizon: usize },
    #[error("environment already done; call reset before stepping")]
    Lifecycle,
    #[error("expected {expected} actions, got {found}")]
    ActionCount { expected: usize, found: usize },
    #[error("barrier input voltage must be positive, got {0}")]
    BadVoltage(f64),
    #[error(transparent)]
    Grid(#[from] tpa_grid::GridError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EnvError>;
