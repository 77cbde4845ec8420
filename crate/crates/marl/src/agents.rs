//! The full trainable state: n actors with target copies, the shared
//! prototype bank and season classifier, and the global critic(s).

use std::collections::BTreeMap;
use std::path::Path;

use rand::rngs::StdRng;
use rand::SeedableRng;

use tpa_agent::{
    Ablation, EncoderConfig, MlpPolicy, Policy, PrototypeBank, PrototypeHyper, SeasonClassifier,
    TpaPolicy, N_PROTOTYPES,
};
use tpa_env::AvcEnv;
use tpa_nn::{load_checkpoint, save_checkpoint, Adam, ParamId, ParamStore};

use crate::config::Algorithm;
use crate::critic::Critic;
use crate::error::{MarlError, Result};
use crate::seed_stream;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActorKind {
    Tpa { ablation: Ablation },
    Mlp,
}

impl ActorKind {
    pub fn is_tpa(self) -> bool {
        matches!(self, ActorKind::Tpa { .. })
    }
}

/// How the bank tensor starts out.
pub enum BankInit {
    /// Explicit 24 x 2h values (data-mode or imported from a checkpoint).
    Values(Vec<f64>),
    /// Seeded uniform fill.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentSetConfig {
    pub algorithm: Algorithm,
    pub actor_kind: ActorKind,
    pub encoder: EncoderConfig,
    pub hyper: PrototypeHyper,
    /// Hidden width of the flat-MLP baseline actor.
    pub mlp_hidden: usize,
    pub critic_hidden: usize,
}

impl Default for AgentSetConfig {
    fn default() -> Self {
        AgentSetConfig {
            algorithm: Algorithm::Maddpg,
            actor_kind: ActorKind::Tpa { ablation: Ablation::default() },
            encoder: EncoderConfig::default(),
            hyper: PrototypeHyper::default(),
            mlp_hidden: 64,
            critic_hidden: 128,
        }
    }
}

pub struct AgentSet {
    pub cfg: AgentSetConfig,
    pub online: ParamStore,
    pub target: ParamStore,
    pub actors: Vec<Policy>,
    pub bank: PrototypeBank,
    pub classifier: SeasonClassifier,
    pub critic: Critic,
    pub critic2: Option<Critic>,
    pub action_bound: f64,
    pub n_agents: usize,
    pub state_dim: usize,
    /// Parameters stepped by the actor optimizer (actors, classifier, and
    /// the bank unless frozen).
    actor_ids: Vec<ParamId>,
    critic_ids: Vec<ParamId>,
    pub opt_actor: Adam,
    pub opt_critic: Adam,
}

impl AgentSet {
    /// Allocates everything for the layout of `env`. `bank_init` seeds the
    /// prototype tensor; `frozen_bank` excludes it from optimization.
    pub fn build(
        env: &AvcEnv,
        cfg: AgentSetConfig,
        bank_init: BankInit,
        frozen_bank: bool,
        actor_lr: f64,
        critic_lr: f64,
        seed: u64,
    ) -> Result<AgentSet> {
        let mut rng = StdRng::seed_from_u64(seed_stream(seed, 0xA11_0C));
        let mut store = ParamStore::new();
        let n_agents = env.n_agents();
        let k = env.config().memory_len;
        let c = env.config().action_bound;
        let dim = cfg.encoder.feature_dim();

        let mut actors = Vec::with_capacity(n_agents);
        for i in 0..n_agents {
            let prefix = format!("actor{i}");
            let policy = match cfg.actor_kind {
                ActorKind::Tpa { ablation } => Policy::Tpa(TpaPolicy::alloc(
                    &mut store,
                    &prefix,
                    cfg.encoder,
                    env.zone_size(i),
                    k,
                    c,
                    ablation,
                    cfg.hyper.eps,
                    &mut rng,
                )?),
                ActorKind::Mlp => Policy::Mlp(MlpPolicy::alloc(
                    &mut store,
                    &prefix,
                    flat_obs_len(env, i),
                    cfg.mlp_hidden,
                    c,
                    &mut rng,
                )?),
            };
            actors.push(policy);
        }

        let bank_values = match bank_init {
            BankInit::Values(v) => {
                if v.len() != N_PROTOTYPES * dim {
                    return Err(MarlError::Incompatible(format!(
                        "bank has {} values, encoder dimension needs {}",
                        v.len(),
                        N_PROTOTYPES * dim
                    )));
                }
                v
            }
            BankInit::Random(bank_seed) => {
                tpa_agent::init_prototypes(
                    env.profiles(),
                    tpa_agent::InitMode::Random,
                    dim,
                    bank_seed,
                )?
            }
        };
        let mut bank = PrototypeBank::from_values(&mut store, dim, bank_values)?;
        bank.frozen = frozen_bank;
        let classifier = SeasonClassifier::alloc(&mut store, &mut rng)?;

        let state_dim = env.state_dim();
        let critic_in = state_dim + n_agents;
        let critic = Critic::alloc(&mut store, "critic", critic_in, cfg.critic_hidden, &mut rng)?;
        let critic2 = match cfg.algorithm {
            Algorithm::Matd3 => Some(Critic::alloc(
                &mut store,
                "critic_b",
                critic_in,
                cfg.critic_hidden,
                &mut rng,
            )?),
            Algorithm::Maddpg => None,
        };

        let mut actor_ids = Vec::new();
        for i in 0..n_agents {
            actor_ids.extend(store.ids_with_prefix(&format!("actor{i}.")));
        }
        actor_ids.extend(store.ids_with_prefix("classifier."));
        if !frozen_bank {
            actor_ids.push(bank.param);
        }
        let mut critic_ids = store.ids_with_prefix("critic.");
        critic_ids.extend(store.ids_with_prefix("critic_b."));

        let opt_actor = Adam::new(&store, actor_lr);
        let opt_critic = Adam::new(&store, critic_lr);
        let target = store.clone();
        Ok(AgentSet {
            cfg,
            online: store,
            target,
            actors,
            bank,
            classifier,
            critic,
            critic2,
            action_bound: c,
            n_agents,
            state_dim,
            actor_ids,
            critic_ids,
            opt_actor,
            opt_critic,
        })
    }

    pub fn actor_param_ids(&self) -> &[ParamId] {
        &self.actor_ids
    }

    pub fn critic_param_ids(&self) -> &[ParamId] {
        &self.critic_ids
    }

    /// Soft-updates every target parameter toward the online ones.
    pub fn soft_update_targets(&mut self, tau: f64) {
        self.online.soft_update_into(&mut self.target, tau);
    }

    /// Deterministic greedy action of agent `i` at the online parameters.
    pub fn act(&self, i: usize, obs: &tpa_env::Observation) -> Result<f64> {
        Ok(self.actors[i].act(&self.online, &self.bank, obs)?)
    }

    /// Target-policy action of agent `i`.
    pub fn act_target(&self, i: usize, obs: &tpa_env::Observation) -> Result<f64> {
        Ok(self.actors[i].act(&self.target, &self.bank, obs)?)
    }

    /// Serializes the online parameters plus the model geometry needed to
    /// rebuild this set.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut extra = BTreeMap::new();
        extra.insert("model".to_string(), self.geometry());
        extra.insert(
            "prototypes.season_of".to_string(),
            serde_json::json!((0..N_PROTOTYPES)
                .map(PrototypeBank::season_of_slot)
                .collect::<Vec<_>>()),
        );
        save_checkpoint(path, &self.online, extra)?;
        Ok(())
    }

    fn geometry(&self) -> serde_json::Value {
        let (kind, no_m, no_s, no_p) = match self.cfg.actor_kind {
            ActorKind::Tpa { ablation } => {
                ("tpa", ablation.no_memory, ablation.no_season, ablation.no_prototype)
            }
            ActorKind::Mlp => ("mlp", false, false, false),
        };
        serde_json::json!({
            "algorithm": self.cfg.algorithm.name(),
            "actor_kind": kind,
            "no_memory": no_m,
            "no_season": no_s,
            "no_prototype": no_p,
            "h": self.cfg.encoder.h,
            "layers": self.cfg.encoder.layers,
            "critic_hidden": self.cfg.critic_hidden,
            "mlp_hidden": self.cfg.mlp_hidden,
            "eps": self.cfg.hyper.eps,
            "xi": self.cfg.hyper.xi,
            "lambda1": self.cfg.hyper.lambda1,
            "lambda2": self.cfg.hyper.lambda2,
            "lambda3": self.cfg.hyper.lambda3,
            "n_agents": self.n_agents,
            "state_dim": self.state_dim,
            "bank_frozen": self.bank.frozen,
        })
    }

    /// Restores online (and target) values from a checkpoint written by
    /// [`AgentSet::save`] for the same geometry. Every tensor is verified
    /// before anything is assigned.
    pub fn restore(&mut self, path: &Path) -> Result<()> {
        let (loaded, _meta) = load_checkpoint(path)?;
        let mut pairs = Vec::with_capacity(self.online.len());
        for (pid, t) in self.online.iter() {
            let lid = loaded.id_of(&t.name).map_err(|_| {
                MarlError::Incompatible(format!("checkpoint is missing tensor {}", t.name))
            })?;
            let lt = loaded.get(lid);
            if lt.shape() != t.shape() {
                return Err(MarlError::Incompatible(format!(
                    "tensor {} has shape {:?} in the checkpoint, {:?} in the model",
                    t.name,
                    lt.shape(),
                    t.shape()
                )));
            }
            pairs.push((pid, lid));
        }
        for (pid, lid) in pairs {
            let values = loaded.get(lid).values.clone();
            self.online.get_mut(pid).values = values;
        }
        self.target = self.online.clone();
        Ok(())
    }

    /// Reads only the prototype bank out of a checkpoint, checking the
    /// feature dimension against `expected_dim` before returning values.
    pub fn load_bank_values(path: &Path, expected_dim: usize) -> Result<Vec<f64>> {
        let (loaded, _meta) = load_checkpoint(path)?;
        let id = loaded
            .id_of("prototypes.bank")
            .map_err(|_| MarlError::Incompatible("checkpoint has no prototypes.bank".into()))?;
        let t = loaded.get(id);
        if t.shape() != [N_PROTOTYPES, expected_dim] {
            return Err(MarlError::Incompatible(format!(
                "bank shape {:?} incompatible with encoder feature dimension {expected_dim}",
                t.shape()
            )));
        }
        Ok(t.values.clone())
    }
}

/// Flat observation width of agent `i` given the env's static layout.
pub fn flat_obs_len(env: &AvcEnv, i: usize) -> usize {
    let topo = env.topology();
    let zone = topo.buses[topo.pv_buses()[i]].zone.expect("pv bus has zone");
    let zb = topo.zone_buses(zone);
    let loads = zb.iter().filter(|&&b| topo.buses[b].load).count();
    let pvs = zb.iter().filter(|&&b| topo.buses[b].pv).count();
    2 * loads + 2 * pvs + 2 * zb.len() + 1 + env.config().memory_len + 4
}
