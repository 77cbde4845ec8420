//! Experiment harnesses: data generation, training runs, cyclic evaluation,
//! transfer studies, season-classifier probes, and plot-data export.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use tpa_env::{
    calendar::days_of_month, default_feeder, generate_synthetic_year, load_profiles_csv,
    save_profiles_csv, slice_episodes, transfer_feeder, AvcEnv, Cursor, EnvConfig, ProfileSet,
    Season, Split, TraceRow, DAYS_PER_YEAR, STEPS_PER_DAY,
};
use tpa_grid::{FeederTopology, PreparedFeeder};
use tpa_marl::{
    rollout, seed_stream, AgentSet, Algorithm, BankInit, EpisodeTrace, TrainOutcome,
    Trainer,
};
use tpa_nn::Tape;

use crate::error::{CliError, Result};
use crate::metrics::{compute_cr, compute_ql, season_table, EpisodeMetrics, SeasonRow};
use crate::runconfig::{Cycle, FeederChoice, RunConfig};

pub const FEEDER_FILE: &str = "feeder.json";
pub const PROFILES_FILE: &str = "profiles.csv";

/// Writes the feeder topology and a deterministic synthetic year to `dir`.
pub fn gen_data(cfg: &RunConfig, seed: u64, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let topo = feeder_of(cfg);
    let feeder_path = dir.join(FEEDER_FILE);
    topo.save_json(&feeder_path)?;
    let profiles = generate_synthetic_year(&topo, &cfg.gen, seed)?;
    let profiles_path = dir.join(PROFILES_FILE);
    save_profiles_csv(&profiles, &profiles_path)?;
    Ok((feeder_path, profiles_path))
}

pub fn feeder_of(cfg: &RunConfig) -> FeederTopology {
    match cfg.feeder {
        FeederChoice::Default => default_feeder(),
        FeederChoice::Transfer => transfer_feeder(),
    }
}

/// Loads `feeder.json` + `profiles.csv` from a data directory.
pub fn load_data(dir: &Path) -> Result<(FeederTopology, Arc<ProfileSet>)> {
    let topo = FeederTopology::load_json(&dir.join(FEEDER_FILE))?;
    let profiles = load_profiles_csv(&dir.join(PROFILES_FILE), &topo)?;
    Ok((topo, Arc::new(profiles)))
}

pub fn make_env(
    topo: &FeederTopology,
    profiles: Arc<ProfileSet>,
    env_cfg: &EnvConfig,
    episode_length: usize,
) -> Result<AvcEnv> {
    let cfg = EnvConfig { episode_length, ..env_cfg.clone() };
    Ok(AvcEnv::new(PreparedFeeder::new(topo.clone())?, profiles, cfg)?)
}

/// Builds the agent set described by the config, with the bank initialized
/// per `[prototype] init` (or from explicit values).
pub fn build_agents(
    env: &AvcEnv,
    cfg: &RunConfig,
    seed: u64,
    bank_override: Option<Vec<f64>>,
    frozen: bool,
) -> Result<AgentSet> {
    let bank = match bank_override {
        Some(values) => BankInit::Values(values),
        None => match cfg.proto_init {
            tpa_agent::InitMode::Random => BankInit::Random(seed_stream(seed, 0xBA)),
            tpa_agent::InitMode::Data => BankInit::Values(tpa_agent::init_prototypes(
                env.profiles(),
                tpa_agent::InitMode::Data,
                cfg.encoder.feature_dim(),
                seed_stream(seed, 0xBA),
            )?),
        },
    };
    Ok(AgentSet::build(
        env,
        cfg.agent_set_config(),
        bank,
        frozen,
        cfg.train.actor_lr,
        cfg.train.critic_lr,
        seed,
    )?)
}

pub struct TrainedRun {
    pub outcome: TrainOutcome,
    pub trainer: Trainer,
    pub run_dir: PathBuf,
    pub checkpoint: PathBuf,
}

/// Full training run under `out_base/<config-hash>-s<seed>/`: resolved
/// config, JSONL log, checkpoints.
pub fn run_training(
    cfg: &RunConfig,
    topo: &FeederTopology,
    profiles: Arc<ProfileSet>,
    seed: u64,
    out_base: &Path,
) -> Result<TrainedRun> {
    let run_dir = out_base.join(cfg.run_dir_name(seed));
    std::fs::create_dir_all(&run_dir)?;
    std::fs::write(run_dir.join("config.cfg"), &cfg.text)?;

    let env = make_env(topo, profiles.clone(), &cfg.env, cfg.env.episode_length)?;
    let agents = build_agents(&env, cfg, seed, None, cfg.frozen_bank)?;
    let train_cursors = slice_episodes(&profiles, Split::Train, cfg.profile_seed)?;
    let val_cursors = slice_episodes(&profiles, Split::Val, cfg.profile_seed)?;

    let mut trainer = Trainer::new(env, agents, cfg.train.clone(), train_cursors, val_cursors, seed)?;
    trainer.log_path = Some(run_dir.join("train_log.jsonl"));
    trainer.checkpoint_dir = Some(run_dir.clone());
    let outcome = trainer.run()?;
    let checkpoint = run_dir.join("final.ckpt");
    Ok(TrainedRun { outcome, trainer, run_dir, checkpoint })
}

/// Restores an agent set from a checkpoint for the given config and env.
pub fn load_agents(env: &AvcEnv, cfg: &RunConfig, path: &Path) -> Result<AgentSet> {
    let mut agents = build_agents(env, cfg, 0, None, cfg.frozen_bank)?;
    agents.restore(path)?;
    Ok(agents)
}

/// What drives the actions during an evaluation rollout.
pub enum Controller<'a> {
    Agents(&'a AgentSet),
    /// All-zero actions (the uncontrolled feeder).
    NoControl,
}

fn rollout_controller(
    env: &mut AvcEnv,
    controller: &Controller<'_>,
    start: Cursor,
    steps: usize,
) -> Result<EpisodeTrace> {
    match controller {
        Controller::Agents(agents) => Ok(rollout(env, agents, start, steps)?),
        Controller::NoControl => {
            let n = env.n_agents();
            let (_obs, _state) = env.reset(start)?;
            let mut trace = EpisodeTrace {
                v: Vec::with_capacity(steps),
                omega: Vec::with_capacity(steps),
                q_pv: Vec::with_capacity(steps),
                p_inj: Vec::with_capacity(steps),
                q_inj: Vec::with_capacity(steps),
                rewards: Vec::with_capacity(steps),
                seasons: Vec::with_capacity(steps),
                converged: Vec::with_capacity(steps),
            };
            for _ in 0..steps {
                let r = env.step(&vec![0.0; n])?;
                trace.v.push(r.info.v.clone());
                trace.omega.push(r.info.omega.clone());
                trace.q_pv.push(r.info.q_pv.clone());
                trace.p_inj.push(r.info.p_inj.clone());
                trace.q_inj.push(r.info.q_inj.clone());
                trace.rewards.push(r.reward);
                trace.seasons.push(env.cursor().season().index());
                trace.converged.push(r.info.converged);
                if r.done {
                    break;
                }
            }
            Ok(trace)
        }
    }
}

fn controlled_indices(topo: &FeederTopology) -> Vec<usize> {
    let slack = topo.index_of(topo.slack_bus).expect("validated");
    (0..topo.n_buses()).filter(|&i| i != slack).collect()
}

/// Day-cycle evaluation: every test-split day as an independent 480-step
/// episode. Returns per-episode metrics tagged by the start day's season.
pub fn day_cycle_metrics(
    topo: &FeederTopology,
    profiles: Arc<ProfileSet>,
    env_cfg: &EnvConfig,
    controller: &Controller<'_>,
    split_seed: u64,
) -> Result<Vec<EpisodeMetrics>> {
    let cursors = slice_episodes(&profiles, Split::Test, split_seed)?;
    let controlled = controlled_indices(topo);
    let band = env_cfg.band;
    let mut env = make_env(topo, profiles, env_cfg, STEPS_PER_DAY)?;
    let mut out = Vec::with_capacity(cursors.len());
    for cursor in cursors {
        let trace = rollout_controller(&mut env, controller, cursor, STEPS_PER_DAY)?;
        out.push(EpisodeMetrics {
            cr: compute_cr(&trace.v, &controlled, &band),
            ql: compute_ql(&trace.q_pv),
            season: cursor.season(),
            steps: trace.v.len(),
        });
    }
    Ok(out)
}

/// Long continuous rollouts: one per month (month cycle) or one for the
/// whole year; memory windows carry across day boundaries.
pub fn month_cycle_metrics(
    topo: &FeederTopology,
    profiles: Arc<ProfileSet>,
    env_cfg: &EnvConfig,
    controller: &Controller<'_>,
) -> Result<Vec<EpisodeMetrics>> {
    require_full_year(&profiles)?;
    let controlled = controlled_indices(topo);
    let band = env_cfg.band;
    let mut out = Vec::with_capacity(12);
    for month in 1..=12 {
        let (start, end) = days_of_month(month);
        let steps = (end - start) * STEPS_PER_DAY;
        let mut env = make_env(topo, profiles.clone(), env_cfg, steps)?;
        let cursor = Cursor::new(start, 0);
        let trace = rollout_controller(&mut env, controller, cursor, steps)?;
        out.push(EpisodeMetrics {
            cr: compute_cr(&trace.v, &controlled, &band),
            ql: compute_ql(&trace.q_pv),
            season: cursor.season(),
            steps: trace.v.len(),
        });
    }
    Ok(out)
}

/// Year cycle: a single continuous rollout; per-season rows come from the
/// step-level season partition of that one trajectory.
pub fn year_cycle_table(
    topo: &FeederTopology,
    profiles: Arc<ProfileSet>,
    env_cfg: &EnvConfig,
    controller: &Controller<'_>,
) -> Result<Vec<SeasonRow>> {
    require_full_year(&profiles)?;
    let controlled = controlled_indices(topo);
    let band = env_cfg.band;
    let steps = DAYS_PER_YEAR * STEPS_PER_DAY;
    let mut env = make_env(topo, profiles, env_cfg, steps)?;
    let trace = rollout_controller(&mut env, controller, Cursor::new(0, 0), steps)?;

    let mut rows = Vec::with_capacity(5);
    for (k, season) in tpa_env::SEASONS.iter().enumerate() {
        let idx: Vec<usize> = (0..trace.v.len()).filter(|&t| trace.seasons[t] == k).collect();
        if idx.is_empty() {
            continue;
        }
        let v: Vec<Vec<f64>> = idx.iter().map(|&t| trace.v[t].clone()).collect();
        let q: Vec<Vec<f64>> = idx.iter().map(|&t| trace.q_pv[t].clone()).collect();
        rows.push(SeasonRow {
            label: season.name().to_string(),
            cr_mean: compute_cr(&v, &controlled, &band),
            cr_std: None,
            ql_mean: compute_ql(&q),
            ql_std: None,
            episodes: 1,
        });
    }
    rows.push(SeasonRow {
        label: "average".to_string(),
        cr_mean: compute_cr(&trace.v, &controlled, &band),
        cr_std: None,
        ql_mean: compute_ql(&trace.q_pv),
        ql_std: None,
        episodes: 1,
    });
    Ok(rows)
}

fn require_full_year(profiles: &ProfileSet) -> Result<()> {
    if profiles.horizon_days < DAYS_PER_YEAR {
        return Err(CliError::Validation(format!(
            "cycle needs the full {DAYS_PER_YEAR}-day horizon, profiles span {} days",
            profiles.horizon_days
        )));
    }
    Ok(())
}

/// Full cyclic report per the `[eval] cycle` choice.
pub struct CycleReport {
    pub day: Option<Vec<SeasonRow>>,
    pub month: Option<Vec<SeasonRow>>,
    pub year: Option<Vec<SeasonRow>>,
}

pub fn eval_cycles(
    topo: &FeederTopology,
    profiles: Arc<ProfileSet>,
    cfg: &RunConfig,
    controller: &Controller<'_>,
    cycle: Cycle,
) -> Result<CycleReport> {
    let mut report = CycleReport { day: None, month: None, year: None };
    if matches!(cycle, Cycle::Day | Cycle::All) {
        let eps = day_cycle_metrics(
            topo,
            profiles.clone(),
            &cfg.env,
            controller,
            cfg.profile_seed,
        )?;
        report.day = Some(season_table(&eps));
    }
    if matches!(cycle, Cycle::Month | Cycle::All) {
        let eps = month_cycle_metrics(topo, profiles.clone(), &cfg.env, controller)?;
        report.month = Some(season_table(&eps));
    }
    if matches!(cycle, Cycle::Year | Cycle::All) {
        report.year = Some(year_cycle_table(topo, profiles, &cfg.env, controller)?);
    }
    Ok(report)
}

pub fn write_report(report: &CycleReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut json = serde_json::Map::new();
    for (name, table) in [
        ("day", &report.day),
        ("month", &report.month),
        ("year", &report.year),
    ] {
        let Some(rows) = table else { continue };
        let mut csv = String::from("season,cr_mean,cr_std,ql_mean,ql_std,episodes\n");
        let mut arr = Vec::new();
        for r in rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                r.label,
                r.cr_mean,
                r.cr_std.map_or(String::new(), |v| v.to_string()),
                r.ql_mean,
                r.ql_std.map_or(String::new(), |v| v.to_string()),
                r.episodes
            );
            arr.push(serde_json::json!({
                "season": r.label,
                "cr_mean": r.cr_mean,
                "cr_std": r.cr_std,
                "ql_mean": r.ql_mean,
                "ql_std": r.ql_std,
                "episodes": r.episodes,
            }));
        }
        std::fs::write(dir.join(format!("metrics_{name}.csv")), csv)?;
        json.insert(name.to_string(), serde_json::Value::Array(arr));
    }
    std::fs::write(
        dir.join("metrics.json"),
        serde_json::to_string_pretty(&serde_json::Value::Object(json))
            .map_err(|e| CliError::Validation(e.to_string()))?,
    )?;
    Ok(())
}

pub struct TransferReport {
    pub transfer_table: Vec<SeasonRow>,
    pub scratch_table: Vec<SeasonRow>,
    pub bank_unchanged: bool,
    pub transfer_dir: PathBuf,
    pub scratch_dir: PathBuf,
}

/// Cross-network transfer: imports the bank from `bank_ckpt`, freezes it,
/// trains a fresh model on this config's feeder, and trains a from-scratch
/// control for comparison.
pub fn transfer_eval(
    cfg: &RunConfig,
    topo: &FeederTopology,
    profiles: Arc<ProfileSet>,
    bank_ckpt: &Path,
    seed: u64,
    out_base: &Path,
) -> Result<TransferReport> {
    let dim = cfg.encoder.feature_dim();
    let bank_values = AgentSet::load_bank_values(bank_ckpt, dim)?;

    // frozen-bank run
    let run_dir = out_base.join(format!("{}-transfer", cfg.run_dir_name(seed)));
    std::fs::create_dir_all(&run_dir)?;
    let env = make_env(topo, profiles.clone(), &cfg.env, cfg.env.episode_length)?;
    let agents = AgentSet::build(
        &env,
        cfg.agent_set_config(),
        BankInit::Values(bank_values.clone()),
        true,
        cfg.train.actor_lr,
        cfg.train.critic_lr,
        seed,
    )?;
    let train_cursors = slice_episodes(&profiles, Split::Train, cfg.profile_seed)?;
    let val_cursors = slice_episodes(&profiles, Split::Val, cfg.profile_seed)?;
    let mut trainer = Trainer::new(
        env,
        agents,
        cfg.train.clone(),
        train_cursors.clone(),
        val_cursors.clone(),
        seed,
    )?;
    trainer.log_path = Some(run_dir.join("train_log.jsonl"));
    trainer.checkpoint_dir = Some(run_dir.clone());
    trainer.run()?;
    let bank_after = trainer
        .agents
        .online
        .get(trainer.agents.bank.param)
        .values
        .clone();
    let bank_unchanged = bank_after
        .iter()
        .zip(&bank_values)
        .all(|(a, b)| a.to_bits() == b.to_bits());
    let transfer_eps = day_cycle_metrics(
        topo,
        profiles.clone(),
        &cfg.env,
        &Controller::Agents(&trainer.agents),
        cfg.profile_seed,
    )?;

    // from-scratch control run
    let scratch_dir = out_base.join(format!("{}-scratch", cfg.run_dir_name(seed)));
    std::fs::create_dir_all(&scratch_dir)?;
    let env = make_env(topo, profiles.clone(), &cfg.env, cfg.env.episode_length)?;
    let agents = build_agents(&env, cfg, seed, None, false)?;
    let mut scratch = Trainer::new(env, agents, cfg.train.clone(), train_cursors, val_cursors, seed)?;
    scratch.log_path = Some(scratch_dir.join("train_log.jsonl"));
    scratch.checkpoint_dir = Some(scratch_dir.clone());
    scratch.run()?;
    let scratch_eps = day_cycle_metrics(
        topo,
        profiles,
        &cfg.env,
        &Controller::Agents(&scratch.agents),
        cfg.profile_seed,
    )?;

    Ok(TransferReport {
        transfer_table: season_table(&transfer_eps),
        scratch_table: season_table(&scratch_eps),
        bank_unchanged,
        transfer_dir: run_dir,
        scratch_dir,
    })
}

/// Supervised probe of the season-classification path: trains the encoder,
/// bank and classifier on the prototype objective over train-split
/// observations, then reports held-out accuracy on the test split.
pub fn train_season_classifier(
    cfg: &RunConfig,
    topo: &FeederTopology,
    profiles: Arc<ProfileSet>,
    seed: u64,
    passes: usize,
) -> Result<f64> {
    let mut env = make_env(topo, profiles.clone(), &cfg.env, cfg.env.episode_length)?;
    let mut agents = build_agents(&env, cfg, seed, None, false)?;

    let sample_days = |split: Split| -> Result<Vec<Cursor>> {
        Ok(slice_episodes(&profiles, split, cfg.profile_seed)?)
    };
    // a few fixed times of day per sampled day, covering night and noon
    let offsets = [0usize, 110, 200, 240, 330, 420];
    let collect = |env: &mut AvcEnv, days: &[Cursor]| -> Result<Vec<(usize, tpa_env::Observation)>> {
        let mut out = Vec::new();
        for cursor in days {
            for &off in &offsets {
                let (obs, _) = env.reset(Cursor::new(cursor.day, off))?;
                for (i, o) in obs.into_iter().enumerate() {
                    out.push((i, o));
                }
            }
        }
        Ok(out)
    };

    let train_days: Vec<Cursor> = sample_days(Split::Train)?
        .into_iter()
        .filter(|c| c.step == 0)
        .collect();
    let test_days = sample_days(Split::Test)?;
    let train_set = collect(&mut env, &train_days)?;
    let test_set = collect(&mut env, &test_days)?;

    let mut rng = StdRng::seed_from_u64(seed_stream(seed, 0x5EA50));
    let ids: Vec<usize> = agents.actor_param_ids().to_vec();
    let batch = 32usize;
    for _ in 0..passes {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        for i in (1..order.len()).rev() {
            let j = rng.gen_range(0..=i);
            order.swap(i, j);
        }
        for chunk in order.chunks(batch) {
            let mut tape = Tape::new();
            let mut features = Vec::with_capacity(chunk.len());
            for &s in chunk {
                let (agent_i, obs) = &train_set[s];
                let out = agents.actors[*agent_i].forward(&mut tape, &agents.online, &agents.bank, obs)?;
                features.push((out.f_z.expect("tpa actor"), obs.season));
            }
            let loss = tpa_agent::loss_prototype_total(
                &mut tape,
                &agents.online,
                &agents.bank,
                &agents.classifier,
                &features,
                &cfg.hyper,
            )?;
            tape.backward(loss);
            agents.online.zero_grads();
            tape.grads_into_store(&mut agents.online);
            agents.opt_actor.step(&mut agents.online, &ids);
        }
    }

    let mut correct = 0usize;
    for (agent_i, obs) in &test_set {
        let mut tape = Tape::eval();
        let out = agents.actors[*agent_i].forward(&mut tape, &agents.online, &agents.bank, obs)?;
        let logits = tpa_agent::season_logits_on_tape(
            &mut tape,
            &agents.online,
            &agents.bank,
            &agents.classifier,
            out.f_z.expect("tpa actor"),
            cfg.hyper.eps,
        )?;
        let row = tape.data(logits);
        let pred = (0..4).max_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap()).unwrap();
        if pred == obs.season {
            correct += 1;
        }
    }
    Ok(correct as f64 / test_set.len() as f64)
}

/// Learning-curve CSV from a JSONL training log.
pub fn export_learning_curves(log_path: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(log_path)?;
    let mut csv = String::from(
        "epoch,mean_reward,val_cr,val_ql,l_critic,l_ac,l_pl,l_pl_ce,l_pl_clst,l_pl_sep,l_pl_div,sigma\n",
    );
    for line in text.lines().filter(|l| !l.is_empty()) {
        let r: tpa_marl::EpochRecord =
            serde_json::from_str(line).map_err(|e| CliError::Validation(e.to_string()))?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.epoch,
            r.mean_reward,
            opt(r.val_cr),
            opt(r.val_ql),
            r.l_critic,
            r.l_ac,
            r.l_pl,
            r.l_pl_ce,
            r.l_pl_clst,
            r.l_pl_sep,
            r.l_pl_div,
            r.sigma
        );
    }
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(out, csv)?;
    Ok(())
}

/// Per-bus day trace (the paper-figure style export): one full-day rollout
/// written as step/bus rows.
pub fn export_day_trace(
    topo: &FeederTopology,
    profiles: Arc<ProfileSet>,
    cfg: &RunConfig,
    controller: &Controller<'_>,
    day: usize,
    out: &Path,
) -> Result<()> {
    if day >= profiles.horizon_days {
        return Err(CliError::Validation(format!(
            "day {day} outside the {}-day horizon",
            profiles.horizon_days
        )));
    }
    let mut env = make_env(topo, profiles, &cfg.env, STEPS_PER_DAY)?;
    let trace = rollout_controller(&mut env, controller, Cursor::new(day, 0), STEPS_PER_DAY)?;
    let mut rows = Vec::with_capacity(trace.v.len() * topo.n_buses());
    for (t, v_step) in trace.v.iter().enumerate() {
        let season = Season::from_index(trace.seasons[t]).name();
        for (b, bus) in topo.buses.iter().enumerate() {
            rows.push(TraceRow {
                step: t,
                bus_id: bus.id,
                v: v_step[b],
                omega: trace.omega[t][b],
                p_inj: trace.p_inj[t][b],
                q_inj: trace.q_inj[t][b],
                reward: trace.rewards[t],
                season,
            });
        }
    }
    if let Some(parent) = out.parent() {
        std::fs::create_dir_all(parent)?;
    }
    tpa_env::write_trace_csv(out, &rows)?;
    Ok(())
}

/// Convenience used by tests: overall (average-row) CR of a day-cycle table.
pub fn average_cr(table: &[SeasonRow]) -> f64 {
    table
        .last()
        .map(|row| row.cr_mean)
        .expect("season tables always carry the average row")
}

/// Builds everything a standard experiment needs from config + data dir.
pub fn standard_setup(
    cfg: &RunConfig,
    data_dir: &Path,
) -> Result<(FeederTopology, Arc<ProfileSet>)> {
    let (topo, profiles) = load_data(data_dir)?;
    let expected = feeder_of(cfg);
    if topo.n_buses() != expected.n_buses() {
        return Err(CliError::Validation(format!(
            "data directory feeder has {} buses but the config selects a {}-bus feeder",
            topo.n_buses(),
            expected.n_buses()
        )));
    }
    Ok((topo, profiles))
}

/// Ensures MATD3 configs carry twin critics and MADDPG ones do not; used by
/// eval/transfer paths to catch config/checkpoint mismatches early.
pub fn check_algorithm(cfg: &RunConfig, agents: &AgentSet) -> Result<()> {
    let twin = agents.critic2.is_some();
    let want_twin = cfg.algorithm == Algorithm::Matd3;
    if twin != want_twin {
        return Err(CliError::Validation(
            "checkpoint algorithm does not match the config".into(),
        ));
    }
    Ok(())
}
