//! Experiment harnesses, metrics and run-configuration for the
//! active-voltage-control laboratory. The `tpa` binary is a thin layer over
//! this library.

pub mod error;
pub mod harness;
pub mod metrics;
pub mod runconfig;

pub use error::{CliError, Result};
