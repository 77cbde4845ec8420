//! Multi-agent actor-critic training with centralized critics and
//! decentralized actors, in MADDPG and MATD3 flavors, over the
//! active-voltage-control environment.

mod agents;
mod buffer;
mod config;
mod critic;
mod error;
mod eval;
mod trainer;

pub use agents::{ActorKind, AgentSet, AgentSetConfig, BankInit};
pub use buffer::{ReplayBuffer, Transition};
pub use config::{Algorithm, TrainConfig};
pub use critic::Critic;
pub use error::{MarlError, Result};
pub use eval::{rollout, EpisodeTrace};
pub use trainer::{train, EpochRecord, TrainOutcome, Trainer};

/// Derives an independent seed stream from a master seed (splitmix64).
pub fn seed_stream(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
