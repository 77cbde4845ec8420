use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("bus {0} appears more than once")]
    DuplicateBus(usize),
    #[error("branch {from}-{to} references unknown bus {unknown}")]
    UnknownBus { from: usize, to: usize, unknown: usize },
    #[error("branch {from}-{to} closes a cycle")]
    Cycle { from: usize, to: usize },
    #[error("bus {0} is not connected to the slack bus")]
    Disconnected(usize),
    #[error("branch {from}-{to} has nonpositive impedance (r = {r}, x = {x})")]
    NonpositiveImpedance { from: usize, to: usize, r: f64, x: f64 },
    #[error("slack bus {0} is not in the bus list")]
    MissingSlack(usize),
    #[error("slack bus {0} must not carry a load or PV")]
    SlackDevice(usize),
    #[error("pv bus {0} has no positive inverter capacity s_max")]
    MissingCapacity(usize),
    #[error("bus {0} has no zone index (zones must partition non-slack buses)")]
    MissingZone(usize),
    #[error("zone {0} is empty (zones must be contiguous from 0)")]
    EmptyZone(usize),
    #[error("expected {expected} branches for {buses} buses, found {found}")]
    BranchCount { buses: usize, expected: usize, found: usize },
    #[error("pv active power {p_pv} exceeds inverter capacity {s_max}")]
    Capacity { p_pv: f64, s_max: f64 },
    #[error("injection vector length {found} does not match {expected} buses")]
    InjectionLength { expected: usize, found: usize },
    #[error("non-finite injection at bus {0}")]
    NonFiniteInjection(usize),
    #[error("voltage collapse during sweep: |v| = {vmag:.4} at bus {bus}")]
    VoltageCollapse { bus: usize, vmag: f64 },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("topology file {path}: unknown fields: {fields}")]
    UnknownFields { path: String, fields: String },
    #[error("topology file {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, GridError>;
