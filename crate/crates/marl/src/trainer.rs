//! Training loop: rollout with exploration, critic regression, deterministic
//! policy gradient with the prototype objective, soft target updates.

use std::io::Write as _;
use std::path::PathBuf;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use tpa_agent::Policy;
use tpa_env::{AvcEnv, Cursor, VoltageBand};
use tpa_nn::Tape;

use crate::agents::AgentSet;
use crate::buffer::{ReplayBuffer, Transition};
use crate::config::{Algorithm, TrainConfig};
use crate::error::{MarlError, Result};
use crate::eval::rollout;
use crate::seed_stream;

/// One line of the training log (JSON-lines, one record per epoch).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_reward: f64,
    pub val_cr: Option<f64>,
    pub val_ql: Option<f64>,
    pub l_critic: f64,
    pub l_ac: f64,
    pub l_pl: f64,
    pub l_pl_ce: f64,
    pub l_pl_clst: f64,
    pub l_pl_sep: f64,
    pub l_pl_div: f64,
    pub sigma: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub log: Vec<EpochRecord>,
    pub epochs_run: usize,
    pub best_val_cr: Option<f64>,
    /// Epoch whose validation produced the retained parameters.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

pub struct Trainer {
    pub env: AvcEnv,
    pub agents: AgentSet,
    pub cfg: TrainConfig,
    buffer: ReplayBuffer,
    rng_explore: StdRng,
    rng_sample: StdRng,
    rng_cursor: StdRng,
    normal: Normal<f64>,
    updates: usize,
    train_cursors: Vec<Cursor>,
    val_cursors: Vec<Cursor>,
    pub log_path: Option<PathBuf>,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Trainer {
    pub fn new(
        env: AvcEnv,
        agents: AgentSet,
        cfg: TrainConfig,
        train_cursors: Vec<Cursor>,
        val_cursors: Vec<Cursor>,
        seed: u64,
    ) -> Result<Trainer> {
        cfg.validate()?;
        if train_cursors.is_empty() {
            return Err(MarlError::Config("no training cursors".into()));
        }
        Ok(Trainer {
            buffer: ReplayBuffer::new(cfg.buffer_capacity),
            rng_explore: StdRng::seed_from_u64(seed_stream(seed, 0xE7)),
            rng_sample: StdRng::seed_from_u64(seed_stream(seed, 0x5A)),
            rng_cursor: StdRng::seed_from_u64(seed_stream(seed, 0xC0)),
            normal: Normal::new(0.0, 1.0).expect("unit normal"),
            updates: 0,
            env,
            agents,
            cfg,
            train_cursors,
            val_cursors,
            log_path: None,
            checkpoint_dir: None,
        })
    }

    /// Noisy action for rollout collection.
    fn explore_action(&mut self, agent: usize, obs: &tpa_env::Observation, sigma: f64) -> Result<f64> {
        let mut a = self.agents.act(agent, obs)?;
        if sigma > 0.0 {
            a += sigma * self.normal.sample(&mut self.rng_explore);
        }
        Ok(a.clamp(-self.agents.action_bound, self.agents.action_bound))
    }

    /// One critic regression step on a sampled batch; returns the loss.
    pub fn critic_update(&mut self, batch: &[usize]) -> Result<f64> {
        let n = self.agents.n_agents;
        let state_dim = self.agents.state_dim;
        let in_dim = state_dim + n;
        let b = batch.len();

        // targets from the target policies and target critic(s)
        let mut next_input = Vec::with_capacity(b * in_dim);
        for &idx in batch {
            let tr = self.buffer.get(idx);
            next_input.extend_from_slice(&tr.next_state);
            for i in 0..n {
                let mut a = self.agents.act_target(i, &tr.next_obs[i])?;
                if self.cfg.algorithm == Algorithm::Matd3 {
                    let noise = (self.cfg.target_noise * self.normal.sample(&mut self.rng_sample))
                        .clamp(-self.cfg.target_noise_clip, self.cfg.target_noise_clip);
                    a += noise;
                }
                next_input.push(a.clamp(-self.agents.action_bound, self.agents.action_bound));
            }
        }
        let q_next = self
            .agents
            .critic
            .eval(&self.agents.target, next_input.clone(), b)?;
        let q_next = match &self.agents.critic2 {
            Some(c2) => {
                let q2 = c2.eval(&self.agents.target, next_input, b)?;
                q_next
                    .iter()
                    .zip(&q2)
                    .map(|(a, b)| a.min(*b))
                    .collect::<Vec<f64>>()
            }
            None => q_next,
        };

        let mut y = Vec::with_capacity(b);
        let mut input = Vec::with_capacity(b * in_dim);
        for (row, &idx) in batch.iter().enumerate() {
            let tr = self.buffer.get(idx);
            // time-limit cuts still bootstrap; only diverged steps use the
            // bare reward
            let target = if tr.diverged {
                tr.reward
            } else {
                tr.reward + self.cfg.gamma * q_next[row]
            };
            y.push(target);
            input.extend_from_slice(&tr.state);
            input.extend_from_slice(&tr.actions);
        }

        let mut tape = Tape::new();
        let x = tape.constant(b, in_dim, input);
        let y_buf = tape.constant(b, 1, y);
        let q1 = self.agents.critic.forward(&mut tape, &self.agents.online, x)?;
        let d1 = tpa_nn::sub(&mut tape, q1, y_buf);
        let sq1 = tpa_nn::square(&mut tape, d1);
        let mut loss = tpa_nn::mean_all(&mut tape, sq1);
        if let Some(c2) = &self.agents.critic2 {
            let q2 = c2.forward(&mut tape, &self.agents.online, x)?;
            let d2 = tpa_nn::sub(&mut tape, q2, y_buf);
            let sq2 = tpa_nn::square(&mut tape, d2);
            let l2 = tpa_nn::mean_all(&mut tape, sq2);
            loss = tpa_nn::add(&mut tape, loss, l2);
        }
        let loss_v = tape.value(loss);
        tape.backward(loss);
        self.agents.online.zero_grads();
        tape.grads_into_store(&mut self.agents.online);
        let ids: Vec<usize> = self.agents.critic_param_ids().to_vec();
        self.agents.opt_critic.step(&mut self.agents.online, &ids);
        Ok(loss_v)
    }

    /// One deterministic-policy-gradient step plus the prototype objective;
    /// returns `(actor loss, pl total, [ce, clst, sep, div])`.
    pub fn policy_update(&mut self, batch: &[usize]) -> Result<(f64, f64, [f64; 4])> {
        let n = self.agents.n_agents;
        let state_dim = self.agents.state_dim;
        let in_dim = state_dim + n;
        let b = batch.len();

        let mut tape = Tape::new();
        let mut actor_loss_terms = Vec::with_capacity(n);
        let mut pl_terms = Vec::with_capacity(n);
        let mut pl_value = 0.0;
        let mut pl_parts = [0.0; 4];

        // shared constant base: states and buffered joint actions
        let mut base = Vec::with_capacity(b * in_dim);
        for &idx in batch {
            let tr = self.buffer.get(idx);
            base.extend_from_slice(&tr.state);
            base.extend_from_slice(&tr.actions);
        }

        // the prototype objective exists only while the prototype mechanism
        // does; the "without prototypes" ablation removes both
        let use_pl = match self.agents.cfg.actor_kind {
            crate::agents::ActorKind::Tpa { ablation } => !ablation.no_prototype,
            crate::agents::ActorKind::Mlp => false,
        };
        for i in 0..n {
            let mut patches = Vec::with_capacity(b);
            let mut features = Vec::with_capacity(b);
            for (row, &idx) in batch.iter().enumerate() {
                let tr = self.buffer.get(idx);
                let out =
                    self.actors_forward(&mut tape, i, &tr.obs[i])?;
                patches.push((row, state_dim + i, out.action));
                if use_pl {
                    if let Some(f_z) = out.f_z {
                        features.push((f_z, tr.obs[i].season));
                    }
                }
            }
            let x = tpa_nn::compose_matrix(&mut tape, b, in_dim, base.clone(), patches);
            let q = self.agents.critic.forward(&mut tape, &self.agents.online, x)?;
            let mean_q = tpa_nn::mean_all(&mut tape, q);
            let neg_q = tpa_nn::scale(&mut tape, mean_q, -1.0);
            actor_loss_terms.push((neg_q, 1.0));

            if use_pl && !features.is_empty() {
                // component values for the log, then the weighted total
                let hyper = self.agents.cfg.hyper;
                let mut ce_terms = Vec::with_capacity(features.len());
                for &(f_z, season) in &features {
                    let logits = tpa_agent::season_logits_on_tape(
                        &mut tape,
                        &self.agents.online,
                        &self.agents.bank,
                        &self.agents.classifier,
                        f_z,
                        hyper.eps,
                    )?;
                    let ce = tpa_nn::cross_entropy_logits(&mut tape, logits, season);
                    ce_terms.push((ce, 1.0 / features.len() as f64));
                }
                let ce = tpa_nn::add_weighted(&mut tape, &ce_terms);
                let clst = tpa_agent::loss_cluster(
                    &mut tape,
                    &self.agents.online,
                    &self.agents.bank,
                    &features,
                );
                let sep = tpa_agent::loss_separation(
                    &mut tape,
                    &self.agents.online,
                    &self.agents.bank,
                    &features,
                );
                let div = tpa_agent::loss_diversity(
                    &mut tape,
                    &self.agents.online,
                    &self.agents.bank,
                    hyper.xi,
                );
                let pl = tpa_nn::add_weighted(
                    &mut tape,
                    &[
                        (ce, 1.0),
                        (clst, hyper.lambda1),
                        (sep, hyper.lambda2),
                        (div, hyper.lambda3),
                    ],
                );
                pl_parts[0] += tape.value(ce) / n as f64;
                pl_parts[1] += tape.value(clst) / n as f64;
                pl_parts[2] += tape.value(sep) / n as f64;
                pl_parts[3] += tape.value(div) / n as f64;
                pl_value += tape.value(pl) / n as f64;
                pl_terms.push((pl, 1.0 / n as f64));
            }
        }

        let l_ac = tpa_nn::add_weighted(&mut tape, &actor_loss_terms);
        let l_ac_value = tape.value(l_ac);
        let total = if pl_terms.is_empty() {
            l_ac
        } else {
            let pl = tpa_nn::add_weighted(&mut tape, &pl_terms);
            tpa_nn::add(&mut tape, l_ac, pl)
        };
        tape.backward(total);
        self.agents.online.zero_grads();
        tape.grads_into_store(&mut self.agents.online);
        let ids: Vec<usize> = self.agents.actor_param_ids().to_vec();
        self.agents.opt_actor.step(&mut self.agents.online, &ids);
        Ok((l_ac_value, pl_value, pl_parts))
    }

    fn actors_forward(
        &self,
        tape: &mut Tape,
        agent: usize,
        obs: &tpa_env::Observation,
    ) -> Result<tpa_agent::PolicyOutput> {
        Ok(self.actors()[agent].forward(tape, &self.agents.online, &self.agents.bank, obs)?)
    }

    fn actors(&self) -> &[Policy] {
        &self.agents.actors
    }

    /// Adds an externally collected transition (harnesses, probes).
    pub fn push_transition(&mut self, t: Transition) {
        self.buffer.push(t);
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    /// One combined update on `batch`: critic regression, then (respecting
    /// the MATD3 policy delay) the actor step and soft target update.
    /// Returns the critic loss and, when the actor ran, its losses.
    pub fn update_step(&mut self, batch: &[usize]) -> Result<(f64, Option<(f64, f64, [f64; 4])>)> {
        let lc = self.critic_update(batch)?;
        self.updates += 1;
        let do_actor = match self.cfg.algorithm {
            Algorithm::Maddpg => true,
            Algorithm::Matd3 => self.updates % self.cfg.policy_delay == 0,
        };
        let actor = if do_actor {
            let out = self.policy_update(batch)?;
            self.agents.soft_update_targets(self.cfg.tau);
            Some(out)
        } else {
            None
        };
        Ok((lc, actor))
    }

    /// Validation rollouts (no exploration): mean per-episode CR and QL
    /// over the validation days.
    pub fn validate(&mut self) -> Result<(f64, f64)> {
        let band = VoltageBand::default();
        let slack = self
            .env
            .topology()
            .index_of(self.env.topology().slack_bus)
            .expect("validated topology");
        let mut crs = Vec::with_capacity(self.val_cursors.len());
        let mut qls = Vec::with_capacity(self.val_cursors.len());
        let cursors = self.val_cursors.clone();
        for cursor in cursors {
            let trace = rollout(
                &mut self.env,
                &self.agents,
                cursor,
                tpa_env::STEPS_PER_DAY,
            )?;
            let mut ok = 0usize;
            for v_step in &trace.v {
                let all_in = v_step
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != slack)
                    .all(|(_, &v)| band.contains(v));
                if all_in {
                    ok += 1;
                }
            }
            crs.push(ok as f64 / trace.v.len() as f64);
            let ql: f64 = trace
                .q_pv
                .iter()
                .map(|qs| qs.iter().map(|q| q.abs()).sum::<f64>() / qs.len() as f64)
                .sum::<f64>()
                / trace.q_pv.len() as f64;
            qls.push(ql);
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Ok((mean(&crs), mean(&qls)))
    }

    /// Full training run. Returns the per-epoch log; also streams it as
    /// JSON-lines when `log_path` is set and checkpoints when
    /// `checkpoint_dir` is set.
    pub fn run(&mut self) -> Result<TrainOutcome> {
        let mut log: Vec<EpochRecord> = Vec::with_capacity(self.cfg.epochs);
        let mut log_file = match &self.log_path {
            Some(p) => {
                if let Some(parent) = p.parent() {
                    std::fs::create_dir_all(parent)?;
                }
                Some(std::io::BufWriter::new(std::fs::File::create(p)?))
            }
            None => None,
        };
        let mut best_val_cr: Option<f64> = None;
        let mut best_epoch: Option<usize> = None;
        // the run's product is the best-validation model, not the last one
        let mut best_params: Option<tpa_nn::ParamStore> = None;
        let mut last_val: (Option<f64>, Option<f64>) = (None, None);
        let mut stopped_early = false;
        let mut epochs_run = 0;

        for epoch in 0..self.cfg.epochs {
            epochs_run = epoch + 1;
            let sigma = self.cfg.noise_sigma(epoch, self.agents.action_bound);
            let cursor = self.train_cursors[self.rng_cursor.gen_range(0..self.train_cursors.len())];
            let (mut obs, mut state) = self.env.reset(cursor)?;

            let mut reward_sum = 0.0;
            let mut critic_losses = 0.0;
            let mut actor_losses = 0.0;
            let mut pl_totals = 0.0;
            let mut pl_parts_sum = [0.0; 4];
            let mut update_count = 0usize;
            let mut actor_update_count = 0usize;

            for step in 0..self.env.config().episode_length {
                let mut actions = Vec::with_capacity(self.agents.n_agents);
                for i in 0..self.agents.n_agents {
                    actions.push(self.explore_action(i, &obs[i], sigma)?);
                }
                let result = self.env.step(&actions)?;
                reward_sum += result.reward;
                self.buffer.push(Transition {
                    state: std::mem::take(&mut state),
                    obs: std::mem::take(&mut obs),
                    actions: result.info.applied_actions.clone(),
                    reward: result.reward,
                    next_state: result.state.clone(),
                    next_obs: result.observations.clone(),
                    done: result.done,
                    diverged: !result.info.converged,
                });
                obs = result.observations;
                state = result.state;

                if self.buffer.len() >= self.cfg.warmup.max(self.cfg.batch_size) {
                    let batch = self.buffer.sample_indices(&mut self.rng_sample, self.cfg.batch_size)?;
                    let (lc, actor) = self.update_step(&batch)?;
                    if !lc.is_finite() {
                        return Err(self.nonfinite("critic loss", epoch, step, &batch));
                    }
                    critic_losses += lc;
                    update_count += 1;
                    if let Some((la, lp, parts)) = actor {
                        if !la.is_finite() || !lp.is_finite() {
                            return Err(self.nonfinite("actor loss", epoch, step, &batch));
                        }
                        actor_losses += la;
                        pl_totals += lp;
                        for (acc, p) in pl_parts_sum.iter_mut().zip(parts) {
                            *acc += p;
                        }
                        actor_update_count += 1;
                    }
                }
            }

            if (epoch + 1) % self.cfg.validate_every == 0 {
                let (cr, ql) = self.validate()?;
                last_val = (Some(cr), Some(ql));
                if best_val_cr.map_or(true, |b| cr > b) {
                    best_val_cr = Some(cr);
                    best_epoch = Some(epoch);
                    best_params = Some(self.agents.online.clone());
                }
                if let Some(stop) = self.cfg.early_stop_cr {
                    if cr >= stop {
                        stopped_early = true;
                    }
                }
            }

            let denom = update_count.max(1) as f64;
            let adenom = actor_update_count.max(1) as f64;
            let record = EpochRecord {
                epoch,
                mean_reward: reward_sum / self.env.config().episode_length as f64,
                val_cr: last_val.0,
                val_ql: last_val.1,
                l_critic: critic_losses / denom,
                l_ac: actor_losses / adenom,
                l_pl: pl_totals / adenom,
                l_pl_ce: pl_parts_sum[0] / adenom,
                l_pl_clst: pl_parts_sum[1] / adenom,
                l_pl_sep: pl_parts_sum[2] / adenom,
                l_pl_div: pl_parts_sum[3] / adenom,
                sigma,
            };
            if let Some(f) = log_file.as_mut() {
                serde_json::to_writer(&mut *f, &record)
                    .map_err(|e| MarlError::Config(e.to_string()))?;
                f.write_all(b"\n")?;
            }
            log.push(record);

            if let (Some(dir), Some(every)) = (&self.checkpoint_dir, self.cfg.checkpoint_every) {
                if (epoch + 1) % every == 0 {
                    std::fs::create_dir_all(dir)?;
                    self.agents.save(&dir.join(format!("epoch{:04}.ckpt", epoch + 1)))?;
                }
            }
            if stopped_early {
                break;
            }
        }

        if let Some(best) = best_params {
            self.agents.online = best;
            self.agents.target = self.agents.online.clone();
        }
        if let Some(dir) = &self.checkpoint_dir {
            std::fs::create_dir_all(dir)?;
            self.agents.save(&dir.join("final.ckpt"))?;
        }
        if let Some(f) = log_file.as_mut() {
            f.flush()?;
        }
        Ok(TrainOutcome { log, epochs_run, best_val_cr, best_epoch, stopped_early })
    }

    fn nonfinite(&self, what: &'static str, epoch: usize, step: usize, batch: &[usize]) -> MarlError {
        let mut detail = format!("batch indices {batch:?}; rewards [");
        for &i in batch {
            detail.push_str(&format!("{:.3} ", self.buffer.get(i).reward));
        }
        detail.push(']');
        MarlError::NonFinite { what, epoch, step, detail }
    }
}

/// Convenience wrapper building the trainer and running it.
#[allow(clippy::too_many_arguments)]
pub fn train(
    env: AvcEnv,
    agents: AgentSet,
    cfg: TrainConfig,
    train_cursors: Vec<Cursor>,
    val_cursors: Vec<Cursor>,
    seed: u64,
    log_path: Option<PathBuf>,
    checkpoint_dir: Option<PathBuf>,
) -> Result<(Trainer, TrainOutcome)> {
    let mut trainer = Trainer::new(env, agents, cfg, train_cursors, val_cursors, seed)?;
    trainer.log_path = log_path;
    trainer.checkpoint_dir = checkpoint_dir;
    let outcome = trainer.run()?;
    Ok((trainer, outcome))
}
