//! Training hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{MarlError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Maddpg,
    Matd3,
}

impl Algorithm {
    pub fn parse(s: &str) -> Option<Algorithm> {
        match s.to_ascii_lowercase().as_str() {
            "maddpg" => Some(Algorithm::Maddpg),
            "matd3" => Some(Algorithm::Matd3),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Maddpg => "maddpg",
            Algorithm::Matd3 => "matd3",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub algorithm: Algorithm,
    pub gamma: f64,
    /// Soft target update rate.
    pub tau: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub buffer_capacity: usize,
    /// Transitions collected before updates start.
    pub warmup: usize,
    /// Exploration noise, as fractions of the action bound; decays linearly
    /// from start to end over the first half of training, then stays flat.
    pub noise_start_frac: f64,
    pub noise_end_frac: f64,
    /// MATD3: actor updated every this many critic updates.
    pub policy_delay: usize,
    /// MATD3: target policy smoothing noise sigma and clip.
    pub target_noise: f64,
    pub target_noise_clip: f64,
    /// Validate every N episodes (1 day per month rollouts).
    pub validate_every: usize,
    /// Stop once validation CR reaches this level.
    pub early_stop_cr: Option<f64>,
    /// Checkpoint cadence in epochs (also writes a final checkpoint).
    pub checkpoint_every: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            algorithm: Algorithm::Maddpg,
            gamma: 0.98,
            tau: 0.01,
            batch_size: 32,
            epochs: 400,
            actor_lr: 1e-4,
            critic_lr: 1e-4,
            buffer_capacity: 5000,
            warmup: 500,
            noise_start_frac: 0.2,
            noise_end_frac: 0.02,
            policy_delay: 2,
            target_noise: 0.05,
            target_noise_clip: 0.1,
            validate_every: 20,
            early_stop_cr: None,
            checkpoint_every: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.gamma) {
            return Err(MarlError::Config(format!("gamma must be in [0, 1), got {}", self.gamma)));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return Err(MarlError::Config(format!("tau must be in (0, 1], got {}", self.tau)));
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return Err(MarlError::Config(format!(
                "batch size {} must be positive and fit the buffer capacity {}",
                self.batch_size, self.buffer_capacity
            )));
        }
        if self.policy_delay == 0 {
            return Err(MarlError::Config("policy delay must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(MarlError::Config("need at least one epoch".into()));
        }
        Ok(())
    }

    /// Exploration sigma (absolute, given the action bound) at `epoch`.
    pub fn noise_sigma(&self, epoch: usize, action_bound: f64) -> f64 {
        let half = (self.epochs / 2).max(1);
        let t = (epoch as f64 / half as f64).min(1.0);
        let frac = self.noise_start_frac + t * (self.noise_end_frac - self.noise_start_frac);
        frac * action_bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        assert!(TrainConfig::default().validate().is_ok());
    }

    #[test]
    fn noise_decays_linearly_then_flattens() {
        let cfg = TrainConfig { epochs: 100, ..TrainConfig::default() };
        let c = 0.8;
        assert!((cfg.noise_sigma(0, c) - 0.2 * c).abs() < 1e-12);
        assert!((cfg.noise_sigma(25, c) - 0.11 * c).abs() < 1e-12);
        assert!((cfg.noise_sigma(50, c) - 0.02 * c).abs() < 1e-12);
        assert!((cfg.noise_sigma(90, c) - 0.02 * c).abs() < 1e-12);
    }

    #[test]
    fn bad_configs_rejected() {
        let mut c = TrainConfig::default();
        c.gamma = 1.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.batch_size = 10_000;
        assert!(c.validate().is_err());
    }
}
