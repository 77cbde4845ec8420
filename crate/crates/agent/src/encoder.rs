//! Multi-scale dynamic encoder.
//!
//! Fine-grain branch: per-bus observation rows are projected to `h`,
//! concatenated with the BiLSTM encoding of the agent's memory window
//! (broadcast across the `r` zone rows) and passed through `L` attention
//! blocks; mean-pooling over rows yields the memory-encoded features
//! `F_m` of width `2h`. Coarse-grain branch: `F_m` is reduced to `h`,
//! paired with the season embedding, run through its own `L` blocks and
//! pooled into the final encoded features `F_z` of width `2h`. No
//! positional encodings are used; zone buses form a set.

use rand::rngs::StdRng;

use tpa_env::{Observation, BUS_FEATURES};
use tpa_nn::{
    attention_block, bilstm_forward, embedding_lookup, linear_forward, AttentionParams,
    BiLstmParams, BufId, ParamId, ParamStore, Tape,
};

use crate::error::{AgentError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EncoderConfig {
    /// Latent dimension `h` (even: the BiLSTM halves it per direction).
    pub h: usize,
    /// Transformer layers per branch.
    pub layers: usize,
    /// Attention scaling factor; defaults to the block width `2h`.
    pub d_k: Option<f64>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        EncoderConfig { h: 64, layers: 3, d_k: None }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.h == 0 || self.h % 2 != 0 {
            return Err(AgentError::Config(format!(
                "latent dim h must be even and positive, got {}",
                self.h
            )));
        }
        if self.layers == 0 {
            return Err(AgentError::Config("need at least one transformer layer".into()));
        }
        if let Some(dk) = self.d_k {
            if dk <= 0.0 {
                return Err(AgentError::Config(format!("d_k must be positive, got {dk}")));
            }
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        2 * self.h
    }
}

/// Weight + bias pair of a dense layer.
#[derive(Debug, Clone, Copy)]
pub struct LinearParams {
    pub w: ParamId,
    pub b: ParamId,
}

impl LinearParams {
    pub fn alloc(
        store: &mut ParamStore,
        prefix: &str,
        rows: usize,
        cols: usize,
        rng: &mut StdRng,
    ) -> Result<LinearParams> {
        Ok(LinearParams {
            w: store.alloc_weight(&format!("{prefix}.w"), rows, cols, rng)?,
            b: store.alloc_zeros(&format!("{prefix}.b"), 1, cols)?,
        })
    }

    pub fn apply(&self, tape: &mut Tape, store: &ParamStore, x: BufId) -> Result<BufId> {
        let w = tape.param(store, self.w);
        let b = tape.param(store, self.b);
        Ok(linear_forward(tape, x, w, b)?)
    }
}

#[derive(Debug, Clone)]
pub struct MultiScaleEncoder {
    pub cfg: EncoderConfig,
    /// Zone size of this agent.
    pub r: usize,
    /// Memory window length.
    pub k: usize,
    g_o: LinearParams,
    g_m: BiLstmParams,
    fine: Vec<AttentionParams>,
    pub g_h: LinearParams,
    g_z: ParamId,
    coarse: Vec<AttentionParams>,
}

impl MultiScaleEncoder {
    pub fn alloc(
        store: &mut ParamStore,
        prefix: &str,
        cfg: EncoderConfig,
        r: usize,
        k: usize,
        rng: &mut StdRng,
    ) -> Result<MultiScaleEncoder> {
        cfg.validate()?;
        if r == 0 {
            return Err(AgentError::Config("zone size r must be positive".into()));
        }
        let h = cfg.h;
        let width = 2 * h;
        let g_o = LinearParams::alloc(store, &format!("{prefix}.g_o"), BUS_FEATURES, h, rng)?;
        let g_m = BiLstmParams::alloc(store, &format!("{prefix}.g_m"), 1, h, rng)?;
        let mut fine = Vec::with_capacity(cfg.layers);
        let mut coarse = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            fine.push(AttentionParams::alloc(
                store,
                &format!("{prefix}.fine.layer{l}"),
                width,
                rng,
            )?);
            coarse.push(AttentionParams::alloc(
                store,
                &format!("{prefix}.coarse.layer{l}"),
                width,
                rng,
            )?);
        }
        let g_h = LinearParams::alloc(store, &format!("{prefix}.g_h"), width, h, rng)?;
        let g_z = store.alloc_weight(&format!("{prefix}.g_z.table"), 4, h, rng)?;
        Ok(MultiScaleEncoder { cfg, r, k, g_o, g_m, fine, g_h, g_z, coarse })
    }

    fn d_k(&self) -> f64 {
        self.cfg.d_k.unwrap_or(2.0 * self.cfg.h as f64)
    }

    /// Projects the zone observation rows to `r x h`.
    pub fn project_observation(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        obs: &Observation,
    ) -> Result<BufId> {
        if obs.rows.len() != self.r {
            return Err(AgentError::Layout(format!(
                "observation has {} zone rows, encoder expects {}",
                obs.rows.len(),
                self.r
            )));
        }
        let x = tape.constant(self.r, BUS_FEATURES, obs.feature_rows());
        self.g_o.apply(tape, store, x)
    }

    /// BiLSTM over the memory window, broadcast to all `r` zone rows.
    pub fn encode_memory(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        memory: &[f64],
    ) -> Result<BufId> {
        if memory.len() != self.k {
            return Err(AgentError::Layout(format!(
                "memory window has length {}, encoder expects {}",
                memory.len(),
                self.k
            )));
        }
        let seq = tape.constant(self.k, 1, memory.to_vec());
        let enc = bilstm_forward(tape, store, seq, self.g_m, self.cfg.h)?;
        Ok(tpa_nn::broadcast_rows(tape, enc, self.r))
    }

    /// Fine-grain branch: `L` attention blocks over `[x_o, x_m]`, pooled to
    /// the memory-encoded features (`1 x 2h`).
    pub fn fine_grain_branch(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        x_o: BufId,
        x_m: BufId,
    ) -> Result<BufId> {
        let mut e = tpa_nn::concat_cols(tape, x_o, x_m);
        for params in &self.fine {
            e = attention_block(tape, store, e, *params, self.d_k())?;
        }
        Ok(tpa_nn::mean_rows(tape, e))
    }

    /// Coarse-grain branch: reduces `F_m`, pairs it with the season
    /// embedding and encodes the final features (`1 x 2h`). `season = None`
    /// zeroes the embedding (the "without season" ablation wiring).
    pub fn coarse_grain_branch(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        f_m: BufId,
        season: Option<usize>,
    ) -> Result<BufId> {
        let f_hat = self.g_h.apply(tape, store, f_m)?;
        let x_z = match season {
            Some(z) => {
                let table = tape.param(store, self.g_z);
                embedding_lookup(tape, z, table)?
            }
            None => tape.constant(1, self.cfg.h, vec![0.0; self.cfg.h]),
        };
        let f_rows = tpa_nn::broadcast_rows(tape, f_hat, self.r);
        let z_rows = tpa_nn::broadcast_rows(tape, x_z, self.r);
        let mut e = tpa_nn::concat_cols(tape, f_rows, z_rows);
        for params in &self.coarse {
            e = attention_block(tape, store, e, *params, self.d_k())?;
        }
        Ok(tpa_nn::mean_rows(tape, e))
    }

    /// Full encoder pass producing `F_z` (`1 x 2h`). `use_memory = false`
    /// zeroes the memory input, `use_season = false` zeroes the embedding.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        obs: &Observation,
        use_memory: bool,
        use_season: bool,
    ) -> Result<BufId> {
        let x_o = self.project_observation(tape, store, obs)?;
        let zeros;
        let mem: &[f64] = if use_memory {
            &obs.memory
        } else {
            zeros = vec![0.0; self.k];
            &zeros
        };
        let x_m = self.encode_memory(tape, store, mem)?;
        let f_m = self.fine_grain_branch(tape, store, x_o, x_m)?;
        self.coarse_grain_branch(tape, store, f_m, use_season.then_some(obs.season))
    }
}
