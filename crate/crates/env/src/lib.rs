//! Active-voltage-control environment: synthetic seasonal profiles over a
//! radial feeder, zone-local observations, and a shared voltage-barrier
//! reward.

mod barrier;
pub mod calendar;
mod env;
mod error;
pub mod profiles;
mod trace;

pub use barrier::{barrier, BarrierKind, VoltageBand};
pub use calendar::{season_of, Cursor, Season, SeasonCalendar, DAYS_PER_YEAR, SEASONS, STEPS_PER_DAY};
pub use env::{compute_reward, AvcEnv, BusRow, EnvConfig, Observation, StepInfo, StepResult, BUS_FEATURES};
pub use error::{EnvError, Result};
pub use profiles::{
    default_feeder, generate_synthetic_year, load_profiles_csv, save_profiles_csv,
    slice_episodes, transfer_feeder, GeneratorParams, ProfileSet, Split,
};
pub use trace::{write_trace_csv, TraceRow, TRACE_HEADER};
