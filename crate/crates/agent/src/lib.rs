//! The temporal prototype-aware (TPA) agent.
//!
//! A policy is a multi-scale dynamic encoder (observation projection,
//! memory BiLSTM, fine- and coarse-grain transformer branches) feeding a
//! prototype-matching head: the encoded features are matched against a
//! global bank of 24 temporal prototypes (6 per season), retrieval features
//! condition the action MLP, and a season classifier plus cluster /
//! separation / diversity losses shape the bank during training.

mod encoder;
mod error;
mod init;
mod policy;
mod prototype;

pub use encoder::{EncoderConfig, LinearParams, MultiScaleEncoder};
pub use error::{AgentError, Result};
pub use init::{init_prototypes, InitMode};
pub use policy::{Ablation, ActionHead, MlpPolicy, Policy, PolicyOutput, TpaPolicy};
pub use prototype::{
    loss_cluster, loss_diversity, loss_prototype_total, loss_separation, match_prototype,
    prototype_sims_on_tape, season_logits_on_tape, similarity, PrototypeBank, PrototypeHyper,
    SeasonClassifier, N_PROTOTYPES, PROTOTYPES_PER_SEASON,
};
