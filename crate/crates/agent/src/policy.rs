//! Actor policies: the full TPA stack and the flat-MLP baseline.

use rand::rngs::StdRng;

use tpa_env::Observation;
use tpa_nn::{BufId, ParamStore, Tape};

use crate::encoder::{EncoderConfig, LinearParams, MultiScaleEncoder};
use crate::error::{AgentError, Result};
use crate::prototype::{match_prototype, PrototypeBank};

/// Component switches for the ablation studies. The wiring always runs end
/// to end; a flag only zeroes or bypasses its input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Ablation {
    /// "without memory": the BiLSTM sees a zero window.
    pub no_memory: bool,
    /// "without season": the season embedding is zeroed.
    pub no_season: bool,
    /// "without prototypes": F_z bypasses matching (reduced through g_h)
    /// and feeds the action head directly.
    pub no_prototype: bool,
}

/// Action MLP: one hidden layer, tanh-squashed to `[-bound, bound]`.
#[derive(Debug, Clone, Copy)]
pub struct ActionHead {
    pub l1: LinearParams,
    pub l2: LinearParams,
    pub bound: f64,
}

impl ActionHead {
    pub fn alloc(
        store: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        hidden: usize,
        bound: f64,
        rng: &mut StdRng,
    ) -> Result<ActionHead> {
        Ok(ActionHead {
            l1: LinearParams::alloc(store, &format!("{prefix}.l1"), in_dim, hidden, rng)?,
            l2: LinearParams::alloc(store, &format!("{prefix}.l2"), hidden, 1, rng)?,
            bound,
        })
    }

    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, x: BufId) -> Result<BufId> {
        let h = self.l1.apply(tape, store, x)?;
        let h = tpa_nn::relu(tape, h);
        let logit = self.l2.apply(tape, store, h)?;
        let squashed = tpa_nn::tanh(tape, logit);
        Ok(tpa_nn::scale(tape, squashed, self.bound))
    }
}

/// Everything the policy pass exposes to the trainer.
#[derive(Debug, Clone, Copy)]
pub struct PolicyOutput {
    /// Scalar action buffer (`1 x 1`).
    pub action: BufId,
    /// Encoded features `F_z` (TPA only).
    pub f_z: Option<BufId>,
    /// Matched prototype slot (TPA with prototypes only).
    pub matched: Option<usize>,
}

/// The temporal prototype-aware actor of one agent.
#[derive(Debug, Clone)]
pub struct TpaPolicy {
    pub encoder: MultiScaleEncoder,
    pub g_c: LinearParams,
    pub head: ActionHead,
    pub ablation: Ablation,
    /// Similarity stabilizer used for matching.
    pub eps: f64,
}

impl TpaPolicy {
    #[allow(clippy::too_many_arguments)]
    pub fn alloc(
        store: &mut ParamStore,
        prefix: &str,
        cfg: EncoderConfig,
        r: usize,
        k: usize,
        action_bound: f64,
        ablation: Ablation,
        eps: f64,
        rng: &mut StdRng,
    ) -> Result<TpaPolicy> {
        let encoder =
            MultiScaleEncoder::alloc(store, &format!("{prefix}.encoder"), cfg, r, k, rng)?;
        let h = cfg.h;
        let g_c = LinearParams::alloc(store, &format!("{prefix}.g_c"), 4 * h, h, rng)?;
        let head = ActionHead::alloc(store, &format!("{prefix}.g_a"), h, h, action_bound, rng)?;
        Ok(TpaPolicy { encoder, g_c, head, ablation, eps })
    }

    /// Retrieval features `F_p = g_c([F_z, p*])`.
    pub fn retrieval_features(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        f_z: BufId,
        bank: &PrototypeBank,
        matched: usize,
    ) -> Result<BufId> {
        if bank.dim != self.encoder.cfg.feature_dim() {
            return Err(AgentError::BankDim {
                bank: bank.dim,
                encoder: self.encoder.cfg.feature_dim(),
            });
        }
        let bank_buf = tape.param(store, bank.param);
        let p_star = tpa_nn::embedding_lookup(tape, matched, bank_buf)?;
        let joint = tpa_nn::concat_cols(tape, f_z, p_star);
        self.g_c.apply(tape, store, joint)
    }

    /// Full actor pass. The prototype match is selected by value (the
    /// argmax is not differentiated); gradients reach the selected
    /// prototype only through `g_c`.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        bank: &PrototypeBank,
        obs: &Observation,
    ) -> Result<PolicyOutput> {
        let f_z = self.encoder.forward(
            tape,
            store,
            obs,
            !self.ablation.no_memory,
            !self.ablation.no_season,
        )?;
        if self.ablation.no_prototype {
            let reduced = self.encoder.g_h.apply(tape, store, f_z)?;
            let action = self.head.apply(tape, store, reduced)?;
            return Ok(PolicyOutput { action, f_z: Some(f_z), matched: None });
        }
        let (matched, _) = match_prototype(store, bank, tape.data(f_z), self.eps);
        let f_p = self.retrieval_features(tape, store, f_z, bank, matched)?;
        let action = self.head.apply(tape, store, f_p)?;
        Ok(PolicyOutput { action, f_z: Some(f_z), matched: Some(matched) })
    }
}

/// Plain MLP actor over the flattened observation (the non-TPA baseline).
#[derive(Debug, Clone)]
pub struct MlpPolicy {
    pub l1: LinearParams,
    pub l2: LinearParams,
    pub head: LinearParams,
    pub bound: f64,
    pub in_dim: usize,
}

impl MlpPolicy {
    pub fn alloc(
        store: &mut ParamStore,
        prefix: &str,
        in_dim: usize,
        hidden: usize,
        bound: f64,
        rng: &mut StdRng,
    ) -> Result<MlpPolicy> {
        Ok(MlpPolicy {
            l1: LinearParams::alloc(store, &format!("{prefix}.l1"), in_dim, hidden, rng)?,
            l2: LinearParams::alloc(store, &format!("{prefix}.l2"), hidden, hidden, rng)?,
            head: LinearParams::alloc(store, &format!("{prefix}.head"), hidden, 1, rng)?,
            bound,
            in_dim,
        })
    }

    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        obs: &Observation,
    ) -> Result<PolicyOutput> {
        let flat = obs.flat();
        if flat.len() != self.in_dim {
            return Err(AgentError::Layout(format!(
                "flat observation has {} entries, policy expects {}",
                flat.len(),
                self.in_dim
            )));
        }
        let x = tape.constant(1, self.in_dim, flat);
        let h = self.l1.apply(tape, store, x)?;
        let h = tpa_nn::relu(tape, h);
        let h = self.l2.apply(tape, store, h)?;
        let h = tpa_nn::relu(tape, h);
        let logit = self.head.apply(tape, store, h)?;
        let squashed = tpa_nn::tanh(tape, logit);
        let action = tpa_nn::scale(tape, squashed, self.bound);
        Ok(PolicyOutput { action, f_z: None, matched: None })
    }
}

/// One agent's actor, either flavor.
#[derive(Debug, Clone)]
pub enum Policy {
    Tpa(TpaPolicy),
    Mlp(MlpPolicy),
}

impl Policy {
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        bank: &PrototypeBank,
        obs: &Observation,
    ) -> Result<PolicyOutput> {
        match self {
            Policy::Tpa(p) => p.forward(tape, store, bank, obs),
            Policy::Mlp(p) => p.forward(tape, store, obs),
        }
    }

    /// Deterministic action at the current parameters (no recording).
    pub fn act(&self, store: &ParamStore, bank: &PrototypeBank, obs: &Observation) -> Result<f64> {
        let mut tape = Tape::eval();
        let out = self.forward(&mut tape, store, bank, obs)?;
        Ok(tape.value(out.action))
    }

    pub fn is_tpa(&self) -> bool {
        matches!(self, Policy::Tpa(_))
    }
}
