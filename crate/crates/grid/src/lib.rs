//! Radial power-distribution feeder model and AC power-flow solver.
//!
//! A [`FeederTopology`] is a tree of buses rooted at the slack bus; loads
//! and PV inverters sit on the buses and inject complex power. The solver
//! ([`PreparedFeeder::solve`]) runs the backward/forward sweep specialized
//! to radial networks: branch currents are accumulated leaves-to-root, then
//! voltages propagate root-to-leaves until the nodal power mismatch drops
//! below tolerance.

mod error;
#[cfg(feature = "oracle")]
pub mod oracle;
mod pv;
mod sweep;
mod topology;

pub use error::{GridError, Result};
pub use pv::pv_reactive_from_action;
pub use sweep::{solve_power_flow, InjectionState, PowerFlowSolution, PreparedFeeder};
pub use topology::{validate_radial, BusSpec, BranchSpec, FeederTopology};
