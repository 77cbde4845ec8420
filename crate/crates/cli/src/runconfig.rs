//! Plain-text run configuration: `[section]` headers and `key = value`
//! lines. Unknown sections or keys are rejected by name; every key has a
//! documented default except the experiment identity (`[marl] algorithm`
//! and `[marl] actor`), which a training run must state explicitly.

use std::collections::BTreeMap;
use std::path::Path;

use tpa_agent::{Ablation, EncoderConfig, InitMode, PrototypeHyper};
use tpa_env::{BarrierKind, EnvConfig, GeneratorParams, VoltageBand};
use tpa_marl::{ActorKind, Algorithm, TrainConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeederChoice {
    Default,
    Transfer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cycle {
    Day,
    Month,
    Year,
    All,
}

impl Cycle {
    pub fn parse(s: &str) -> Option<Cycle> {
        match s.to_ascii_lowercase().as_str() {
            "day" => Some(Cycle::Day),
            "month" => Some(Cycle::Month),
            "year" => Some(Cycle::Year),
            "all" => Some(Cycle::All),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub env: EnvConfig,
    pub encoder: EncoderConfig,
    pub hyper: PrototypeHyper,
    pub proto_init: InitMode,
    pub frozen_bank: bool,
    pub train: TrainConfig,
    pub actor: ActorKind,
    pub algorithm: Algorithm,
    pub critic_hidden: usize,
    pub mlp_hidden: usize,
    pub gen: GeneratorParams,
    pub profile_seed: u64,
    pub feeder: FeederChoice,
    pub cycle: Cycle,
    /// Raw file text; run directories are named by its hash.
    pub text: String,
}

/// FNV-1a over the config text, for stable run-directory names.
pub fn fnv1a(text: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

struct Parsed {
    entries: BTreeMap<(String, String), (String, usize)>,
}

fn parse_text(text: &str) -> Result<Parsed> {
    const SECTIONS: &[&str] = &["env", "encoder", "prototype", "marl", "profiles", "eval"];
    let mut entries = BTreeMap::new();
    let mut section: Option<String> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim().to_ascii_lowercase();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(CliError::Config(format!(
                    "line {}: unknown section [{name}]",
                    lineno + 1
                )));
            }
            section = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "line {}: expected `key = value`, got `{line}`",
                lineno + 1
            )));
        };
        let Some(section) = section.clone() else {
            return Err(CliError::Config(format!(
                "line {}: key `{}` appears before any [section]",
                lineno + 1,
                key.trim()
            )));
        };
        entries.insert(
            (section, key.trim().to_ascii_lowercase()),
            (value.trim().to_string(), lineno + 1),
        );
    }
    Ok(Parsed { entries })
}

impl Parsed {
    fn take(&mut self, section: &str, key: &str) -> Option<String> {
        self.entries
            .remove(&(section.to_string(), key.to_string()))
            .map(|(v, _)| v)
    }

    fn take_parse<T: std::str::FromStr>(
        &mut self,
        section: &str,
        key: &str,
        default: T,
    ) -> Result<T> {
        match self.take(section, key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| {
                CliError::Config(format!("[{section}] {key}: cannot parse `{v}`"))
            }),
        }
    }

    fn take_bool(&mut self, section: &str, key: &str, default: bool) -> Result<bool> {
        match self.take(section, key) {
            None => Ok(default),
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(CliError::Config(format!(
                    "[{section}] {key}: expected a boolean, got `{v}`"
                ))),
            },
        }
    }

    fn finish(self) -> Result<()> {
        if self.entries.is_empty() {
            return Ok(());
        }
        let names: Vec<String> = self
            .entries
            .keys()
            .map(|(s, k)| format!("[{s}] {k}"))
            .collect();
        Err(CliError::Config(format!(
            "unknown keys: {}",
            names.join(", ")
        )))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<RunConfig> {
        let mut p = parse_text(text)?;

        let mut env = EnvConfig::default();
        env.episode_length = p.take_parse("env", "episode_length", env.episode_length)?;
        if let Some(v) = p.take("env", "barrier") {
            env.barrier_kind = BarrierKind::parse(&v).ok_or_else(|| {
                CliError::Config(format!("[env] barrier: expected l1|l2|bowl, got `{v}`"))
            })?;
        }
        env.alpha = p.take_parse("env", "alpha", env.alpha)?;
        env.action_bound = p.take_parse("env", "action_bound", env.action_bound)?;
        let v_min = p.take_parse("env", "v_min", env.band.v_min)?;
        let v_max = p.take_parse("env", "v_max", env.band.v_max)?;
        let v_ref = p.take_parse("env", "v_ref", env.band.v_ref)?;
        if !(0.0 < v_min && v_min < v_ref && v_ref < v_max) {
            return Err(CliError::Config(format!(
                "[env] voltage band must satisfy 0 < v_min < v_ref < v_max, got {v_min}/{v_ref}/{v_max}"
            )));
        }
        env.band = VoltageBand { v_min, v_max, v_ref };
        env.memory_len = p.take_parse("env", "memory_len", env.memory_len)?;
        env.pf_tol = p.take_parse("env", "pf_tol", env.pf_tol)?;
        env.pf_max_iter = p.take_parse("env", "pf_max_iter", env.pf_max_iter)?;
        env.diverged_penalty = p.take_parse("env", "diverged_penalty", env.diverged_penalty)?;

        let mut encoder = EncoderConfig::default();
        encoder.h = p.take_parse("encoder", "h", encoder.h)?;
        encoder.layers = p.take_parse("encoder", "layers", encoder.layers)?;

        let mut hyper = PrototypeHyper::default();
        hyper.eps = p.take_parse("prototype", "eps", hyper.eps)?;
        hyper.xi = p.take_parse("prototype", "xi", hyper.xi)?;
        hyper.lambda1 = p.take_parse("prototype", "lambda1", hyper.lambda1)?;
        hyper.lambda2 = p.take_parse("prototype", "lambda2", hyper.lambda2)?;
        hyper.lambda3 = p.take_parse("prototype", "lambda3", hyper.lambda3)?;
        let proto_init = match p.take("prototype", "init") {
            None => InitMode::Data,
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "data" => InitMode::Data,
                "random" => InitMode::Random,
                _ => {
                    return Err(CliError::Config(format!(
                        "[prototype] init: expected data|random, got `{v}`"
                    )))
                }
            },
        };
        let frozen_bank = p.take_bool("prototype", "frozen", false)?;

        let algorithm = match p.take("marl", "algorithm") {
            Some(v) => Algorithm::parse(&v).ok_or_else(|| {
                CliError::Config(format!("[marl] algorithm: expected maddpg|matd3, got `{v}`"))
            })?,
            None => return Err(CliError::Config("missing required key [marl] algorithm".into())),
        };
        let actor = match p.take("marl", "actor") {
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "tpa" => ActorKind::Tpa { ablation: Ablation::default() },
                "tpa_no_m" => ActorKind::Tpa {
                    ablation: Ablation { no_memory: true, ..Default::default() },
                },
                "tpa_no_s" => ActorKind::Tpa {
                    ablation: Ablation { no_season: true, ..Default::default() },
                },
                "tpa_no_p" => ActorKind::Tpa {
                    ablation: Ablation { no_prototype: true, ..Default::default() },
                },
                "mlp" => ActorKind::Mlp,
                _ => {
                    return Err(CliError::Config(format!(
                        "[marl] actor: expected tpa|tpa_no_m|tpa_no_s|tpa_no_p|mlp, got `{v}`"
                    )))
                }
            },
            None => return Err(CliError::Config("missing required key [marl] actor".into())),
        };
        let mut train = TrainConfig { algorithm, ..TrainConfig::default() };
        train.gamma = p.take_parse("marl", "gamma", train.gamma)?;
        train.tau = p.take_parse("marl", "tau", train.tau)?;
        train.batch_size = p.take_parse("marl", "batch_size", train.batch_size)?;
        train.epochs = p.take_parse("marl", "epochs", train.epochs)?;
        train.actor_lr = p.take_parse("marl", "actor_lr", train.actor_lr)?;
        train.critic_lr = p.take_parse("marl", "critic_lr", train.critic_lr)?;
        train.buffer_capacity = p.take_parse("marl", "buffer_capacity", train.buffer_capacity)?;
        train.warmup = p.take_parse("marl", "warmup", train.warmup)?;
        train.noise_start_frac = p.take_parse("marl", "noise_start", train.noise_start_frac)?;
        train.noise_end_frac = p.take_parse("marl", "noise_end", train.noise_end_frac)?;
        train.policy_delay = p.take_parse("marl", "policy_delay", train.policy_delay)?;
        train.target_noise = p.take_parse("marl", "target_noise", train.target_noise)?;
        train.target_noise_clip =
            p.take_parse("marl", "target_noise_clip", train.target_noise_clip)?;
        train.validate_every = p.take_parse("marl", "validate_every", train.validate_every)?;
        if let Some(v) = p.take("marl", "early_stop_cr") {
            train.early_stop_cr = Some(v.parse().map_err(|_| {
                CliError::Config(format!("[marl] early_stop_cr: cannot parse `{v}`"))
            })?);
        }
        if let Some(v) = p.take("marl", "checkpoint_every") {
            train.checkpoint_every = Some(v.parse().map_err(|_| {
                CliError::Config(format!("[marl] checkpoint_every: cannot parse `{v}`"))
            })?);
        }
        let critic_hidden = p.take_parse("marl", "critic_hidden", 128usize)?;
        let mlp_hidden = p.take_parse("marl", "mlp_hidden", 64usize)?;

        let mut gen = GeneratorParams::default();
        gen.power_factor = p.take_parse("profiles", "power_factor", gen.power_factor)?;
        gen.noise = p.take_parse("profiles", "noise", gen.noise)?;
        gen.load_noise_sigma =
            p.take_parse("profiles", "load_noise_sigma", gen.load_noise_sigma)?;
        gen.load_peak = p.take_parse("profiles", "load_peak", gen.load_peak)?;
        gen.horizon_days = p.take_parse("profiles", "horizon_days", gen.horizon_days)?;
        let profile_seed = p.take_parse("profiles", "seed", 1u64)?;
        let feeder = match p.take("profiles", "feeder") {
            None => FeederChoice::Default,
            Some(v) => match v.to_ascii_lowercase().as_str() {
                "default" => FeederChoice::Default,
                "transfer" => FeederChoice::Transfer,
                _ => {
                    return Err(CliError::Config(format!(
                        "[profiles] feeder: expected default|transfer, got `{v}`"
                    )))
                }
            },
        };

        let cycle = match p.take("eval", "cycle") {
            None => Cycle::Day,
            Some(v) => Cycle::parse(&v).ok_or_else(|| {
                CliError::Config(format!("[eval] cycle: expected day|month|year|all, got `{v}`"))
            })?,
        };

        p.finish()?;
        encoder.validate().map_err(|e| CliError::Config(e.to_string()))?;
        train.validate().map_err(|e| CliError::Config(e.to_string()))?;

        Ok(RunConfig {
            env,
            encoder,
            hyper,
            proto_init,
            frozen_bank,
            train,
            actor,
            algorithm,
            critic_hidden,
            mlp_hidden,
            gen,
            profile_seed,
            feeder,
            cycle,
            text: text.to_string(),
        })
    }

    /// Run directory name: config hash plus seed.
    pub fn run_dir_name(&self, seed: u64) -> String {
        format!("run-{:016x}-s{seed}", fnv1a(&self.text))
    }

    pub fn agent_set_config(&self) -> tpa_marl::AgentSetConfig {
        tpa_marl::AgentSetConfig {
            algorithm: self.algorithm,
            actor_kind: self.actor,
            encoder: self.encoder,
            hyper: self.hyper,
            mlp_hidden: self.mlp_hidden,
            critic_hidden: self.critic_hidden,
        }
    }
}
