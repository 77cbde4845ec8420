//! Shared-reward Dec-POMDP environment for active voltage control.
//!
//! Each PV inverter is an agent observing only its zone. A step clips the
//! joint action, dispatches reactive power through the inverter capability
//! curve, advances the profile cursor, solves the feeder and scores the
//! shared reward. Everything is a pure function of (cursor, action
//! sequence); no randomness lives here.

use std::sync::Arc;

use tpa_grid::{pv_reactive_from_action, InjectionState, PowerFlowSolution, PreparedFeeder};

use crate::barrier::{barrier, BarrierKind, VoltageBand};
use crate::calendar::Cursor;
use crate::error::{EnvError, Result};
use crate::profiles::ProfileSet;

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    /// Steps per training episode (a half day at 3-minute resolution).
    pub episode_length: usize,
    pub barrier_kind: BarrierKind,
    /// Reactive-generation penalty weight in the reward.
    pub alpha: f64,
    /// Action bound `c`: actions live in `[-c, c]`.
    pub action_bound: f64,
    pub band: VoltageBand,
    /// Memory window length `K` (the agent's own recent reactive outputs).
    pub memory_len: usize,
    pub pf_tol: f64,
    pub pf_max_iter: usize,
    /// Reward assigned to a step whose power flow failed to converge.
    pub diverged_penalty: f64,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            episode_length: 240,
            barrier_kind: BarrierKind::L1,
            alpha: 0.1,
            action_bound: 0.8,
            band: VoltageBand::default(),
            memory_len: 20,
            pf_tol: 1e-8,
            pf_max_iter: 100,
            diverged_penalty: -5.0,
        }
    }
}

/// Static per-bus features of one zone row, ascending by bus id.
#[derive(Debug, Clone, PartialEq)]
pub struct BusRow {
    pub bus_id: usize,
    pub has_load: bool,
    pub has_pv: bool,
    pub p_load: f64,
    pub q_load: f64,
    pub p_pv: f64,
    pub q_pv_prev: f64,
    pub v: f64,
    pub omega: f64,
}

/// Zone-local observation of one agent.
///
/// Flat layout (fixed per zone): loads `(p, q)` over zone load buses, PV
/// `(p, q_prev)` over zone PV buses, voltages `(v, omega)` over all zone
/// buses — each group ascending by bus id — then the zone index, the
/// memory window (length `K`, zero-padded at episode start) and the one-hot
/// season label.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub zone: usize,
    pub rows: Vec<BusRow>,
    pub memory: Vec<f64>,
    pub season: usize,
}

impl Observation {
    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.flat_len());
        for r in self.rows.iter().filter(|r| r.has_load) {
            v.push(r.p_load);
            v.push(r.q_load);
        }
        for r in self.rows.iter().filter(|r| r.has_pv) {
            v.push(r.p_pv);
            v.push(r.q_pv_prev);
        }
        for r in &self.rows {
            v.push(r.v);
            v.push(r.omega);
        }
        v.push(self.zone as f64);
        v.extend_from_slice(&self.memory);
        let mut one_hot = [0.0; 4];
        one_hot[self.season] = 1.0;
        v.extend_from_slice(&one_hot);
        v
    }

    pub fn flat_len(&self) -> usize {
        let loads = self.rows.iter().filter(|r| r.has_load).count();
        let pvs = self.rows.iter().filter(|r| r.has_pv).count();
        2 * loads + 2 * pvs + 2 * self.rows.len() + 1 + self.memory.len() + 4
    }

    /// Per-bus feature matrix for the observation projection: one row per
    /// zone bus, columns `[p_load, q_load, p_pv, q_pv_prev, v, omega]`.
    pub fn feature_rows(&self) -> Vec<f64> {
        let mut m = Vec::with_capacity(self.rows.len() * BUS_FEATURES);
        for r in &self.rows {
            m.extend_from_slice(&[r.p_load, r.q_load, r.p_pv, r.q_pv_prev, r.v, r.omega]);
        }
        m
    }
}

/// Width of one [`Observation::feature_rows`] row.
pub const BUS_FEATURES: usize = 6;

#[derive(Debug, Clone)]
pub struct StepInfo {
    pub v: Vec<f64>,
    pub omega: Vec<f64>,
    pub p_inj: Vec<f64>,
    pub q_inj: Vec<f64>,
    /// Dispatched reactive power per agent (the env's `q^pv`).
    pub q_pv: Vec<f64>,
    pub applied_actions: Vec<f64>,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub observations: Vec<Observation>,
    /// Single shared scalar; every agent receives this same value.
    pub reward: f64,
    pub state: Vec<f64>,
    pub done: bool,
    pub info: StepInfo,
}

#[derive(Debug, Clone)]
struct AgentLayout {
    pv_bus: usize,
    zone: usize,
    s_max: f64,
}

/// Eq. of the shared reward: mean barrier loss over controlled buses plus
/// `alpha` times the mean absolute reactive generation. Non-converged
/// solutions score the fixed divergence penalty.
pub fn compute_reward(
    solution: &PowerFlowSolution,
    q_pv: &[f64],
    controlled: &[usize],
    cfg: &EnvConfig,
) -> Result<f64> {
    if !solution.converged {
        return Ok(cfg.diverged_penalty);
    }
    let mut vsum = 0.0;
    for &b in controlled {
        vsum += barrier(solution.v_mag[b], cfg.barrier_kind, &cfg.band)?;
    }
    let vloss = vsum / controlled.len() as f64;
    let qloss = q_pv.iter().map(|q| q.abs()).sum::<f64>() / q_pv.len() as f64;
    Ok(-vloss - cfg.alpha * qloss)
}

pub struct AvcEnv {
    feeder: PreparedFeeder,
    profiles: Arc<ProfileSet>,
    cfg: EnvConfig,
    agents: Vec<AgentLayout>,
    /// Bus indices per zone, ascending by bus id.
    zone_buses: Vec<Vec<usize>>,
    /// Bus indices ascending by id (state layout order).
    state_order: Vec<usize>,
    /// Non-slack bus indices: the controlled set of the reward.
    controlled: Vec<usize>,
    load_series_of_bus: Vec<Option<usize>>,
    pv_series_of_bus: Vec<Option<usize>>,
    agent_of_bus: Vec<Option<usize>>,

    cursor: Cursor,
    steps_done: usize,
    done: bool,
    memories: Vec<Vec<f64>>,
    q_pv_prev: Vec<f64>,
    last_v: Vec<f64>,
    last_omega: Vec<f64>,
}

impl AvcEnv {
    pub fn new(
        feeder: PreparedFeeder,
        profiles: Arc<ProfileSet>,
        cfg: EnvConfig,
    ) -> Result<AvcEnv> {
        let topo = feeder.topology();
        let n = topo.n_buses();

        let mut load_series_of_bus = vec![None; n];
        for (k, &id) in profiles.load_bus_ids.iter().enumerate() {
            let idx = topo.index_of(id).ok_or_else(|| {
                EnvError::BadParams(format!("profiles name load bus {id} absent from topology"))
            })?;
            load_series_of_bus[idx] = Some(k);
        }
        let mut pv_series_of_bus = vec![None; n];
        for (k, &id) in profiles.pv_bus_ids.iter().enumerate() {
            let idx = topo.index_of(id).ok_or_else(|| {
                EnvError::BadParams(format!("profiles name pv bus {id} absent from topology"))
            })?;
            pv_series_of_bus[idx] = Some(k);
        }
        for (i, b) in topo.buses.iter().enumerate() {
            if b.load && load_series_of_bus[i].is_none() {
                return Err(EnvError::BadParams(format!(
                    "topology load bus {} missing from profiles",
                    b.id
                )));
            }
            if b.pv && pv_series_of_bus[i].is_none() {
                return Err(EnvError::BadParams(format!(
                    "topology pv bus {} missing from profiles",
                    b.id
                )));
            }
        }

        let mut agents = Vec::new();
        let mut agent_of_bus = vec![None; n];
        for &i in &topo.pv_buses() {
            agent_of_bus[i] = Some(agents.len());
            agents.push(AgentLayout {
                pv_bus: i,
                zone: topo.buses[i].zone.expect("validated pv bus has a zone"),
                s_max: topo.buses[i].s_max.expect("validated pv bus has s_max"),
            });
        }
        if agents.is_empty() {
            return Err(EnvError::BadParams("topology has no PV agents".into()));
        }

        let zone_buses: Vec<Vec<usize>> =
            (0..topo.n_zones()).map(|z| topo.zone_buses(z)).collect();
        let mut state_order: Vec<usize> = (0..n).collect();
        state_order.sort_by_key(|&i| topo.buses[i].id);
        let slack_idx = topo.index_of(topo.slack_bus).expect("validated slack");
        let controlled: Vec<usize> = state_order
            .iter()
            .copied()
            .filter(|&i| i != slack_idx)
            .collect();

        let n_agents = agents.len();
        Ok(AvcEnv {
            feeder,
            profiles,
            cfg,
            agents,
            zone_buses,
            state_order,
            controlled,
            load_series_of_bus,
            pv_series_of_bus,
            agent_of_bus,
            cursor: Cursor::new(0, 0),
            steps_done: 0,
            done: true,
            memories: vec![Vec::new(); n_agents],
            q_pv_prev: vec![0.0; n_agents],
            last_v: vec![1.0; n],
            last_omega: vec![0.0; n],
        })
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn profiles(&self) -> &ProfileSet {
        &self.profiles
    }

    pub fn topology(&self) -> &tpa_grid::FeederTopology {
        self.feeder.topology()
    }

    /// Zone size `r` of agent `i` (rows of its observation).
    pub fn zone_size(&self, agent: usize) -> usize {
        self.zone_buses[self.agents[agent].zone].len()
    }

    pub fn cursor(&self) -> Cursor {
        self.cursor
    }

    /// Width of the global state vector.
    pub fn state_dim(&self) -> usize {
        6 * self.state_order.len() + 4
    }

    fn injections(&self, cursor: Cursor, q_pv: &[f64]) -> InjectionState {
        let n = self.feeder.topology().n_buses();
        let mut inj = InjectionState::zeros(n);
        for i in 0..n {
            if let Some(k) = self.load_series_of_bus[i] {
                let (p, q) = self.profiles.load_at(k, cursor);
                inj.p[i] -= p;
                inj.q[i] -= q;
            }
            if let Some(k) = self.pv_series_of_bus[i] {
                inj.p[i] += self.profiles.pv_at(k, cursor);
            }
        }
        for (a, layout) in self.agents.iter().enumerate() {
            inj.q[layout.pv_bus] += q_pv[a];
        }
        inj
    }

    fn check_cursor(&self, cursor: Cursor) -> Result<()> {
        if cursor.day >= self.profiles.horizon_days {
            return Err(EnvError::CursorRange {
                day: cursor.day,
                horizon: self.profiles.horizon_days,
            });
        }
        Ok(())
    }

    /// Starts an episode at `cursor`: uncontrolled PV (q = 0), zeroed
    /// memories, season from the cursor's month.
    pub fn reset(&mut self, cursor: Cursor) -> Result<(Vec<Observation>, Vec<f64>)> {
        self.check_cursor(cursor)?;
        let n_agents = self.agents.len();
        self.cursor = cursor;
        self.steps_done = 0;
        self.done = false;
        self.memories = vec![vec![0.0; self.cfg.memory_len]; n_agents];
        self.q_pv_prev = vec![0.0; n_agents];

        let inj = self.injections(cursor, &vec![0.0; n_agents]);
        let sol = self
            .feeder
            .solve(&inj, self.cfg.pf_tol, self.cfg.pf_max_iter)?;
        self.last_v = sol.v_mag.clone();
        self.last_omega = sol.v_ang.clone();
        Ok((self.observations(cursor), self.state(cursor)))
    }

    /// Applies the joint action and advances one step.
    pub fn step(&mut self, actions: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(EnvError::Lifecycle);
        }
        let n_agents = self.agents.len();
        if actions.len() != n_agents {
            return Err(EnvError::ActionCount {
                expected: n_agents,
                found: actions.len(),
            });
        }
        let c = self.cfg.action_bound;
        let applied: Vec<f64> = actions.iter().map(|a| a.clamp(-c, c)).collect();

        let cursor = self.cursor.advanced(self.profiles.horizon_days);
        let mut q_pv = vec![0.0; n_agents];
        for (a, layout) in self.agents.iter().enumerate() {
            let p_now = self
                .profiles
                .pv_at(self.pv_series_of_bus[layout.pv_bus].unwrap(), cursor);
            q_pv[a] = pv_reactive_from_action(applied[a], p_now, layout.s_max)?;
        }

        let inj = self.injections(cursor, &q_pv);
        let sol = match self.feeder.solve(&inj, self.cfg.pf_tol, self.cfg.pf_max_iter) {
            Ok(sol) => sol,
            Err(tpa_grid::GridError::VoltageCollapse { .. }) => {
                // hold the last voltages; the step scores the divergence penalty
                PowerFlowSolution {
                    v_mag: self.last_v.clone(),
                    v_ang: self.last_omega.clone(),
                    loss_p: 0.0,
                    slack_p: 0.0,
                    slack_q: 0.0,
                    max_mismatch: f64::INFINITY,
                    iterations: 0,
                    converged: false,
                }
            }
            Err(e) => return Err(e.into()),
        };
        let reward = compute_reward(&sol, &q_pv, &self.controlled, &self.cfg)?;

        if sol.converged {
            self.last_v = sol.v_mag.clone();
            self.last_omega = sol.v_ang.clone();
        }
        for (a, mem) in self.memories.iter_mut().enumerate() {
            mem.remove(0);
            mem.push(q_pv[a]);
        }
        self.q_pv_prev = q_pv.clone();
        self.cursor = cursor;
        self.steps_done += 1;
        self.done = self.steps_done >= self.cfg.episode_length;

        let observations = self.observations(cursor);
        let state = self.state(cursor);
        Ok(StepResult {
            observations,
            reward,
            state,
            done: self.done,
            info: StepInfo {
                v: self.last_v.clone(),
                omega: self.last_omega.clone(),
                p_inj: inj.p,
                q_inj: inj.q,
                q_pv,
                applied_actions: applied,
                converged: sol.converged,
            },
        })
    }

    fn bus_row(&self, bus: usize, cursor: Cursor) -> BusRow {
        let topo = self.feeder.topology();
        let spec = &topo.buses[bus];
        let (p_load, q_load) = self
            .load_series_of_bus[bus]
            .map(|k| self.profiles.load_at(k, cursor))
            .unwrap_or((0.0, 0.0));
        let p_pv = self.pv_series_of_bus[bus]
            .map(|k| self.profiles.pv_at(k, cursor))
            .unwrap_or(0.0);
        let q_pv_prev = self.agent_of_bus[bus]
            .map(|a| self.q_pv_prev[a])
            .unwrap_or(0.0);
        BusRow {
            bus_id: spec.id,
            has_load: spec.load,
            has_pv: spec.pv,
            p_load,
            q_load,
            p_pv,
            q_pv_prev,
            v: self.last_v[bus],
            omega: self.last_omega[bus],
        }
    }

    fn observations(&self, cursor: Cursor) -> Vec<Observation> {
        let season = cursor.season().index();
        self.agents
            .iter()
            .enumerate()
            .map(|(a, layout)| Observation {
                zone: layout.zone,
                rows: self.zone_buses[layout.zone]
                    .iter()
                    .map(|&b| self.bus_row(b, cursor))
                    .collect(),
                memory: self.memories[a].clone(),
                season,
            })
            .collect()
    }

    /// Global critic state: `(p_load, q_load, p_pv, q_pv_prev, v, omega)`
    /// over all buses ascending by id, then the one-hot season.
    fn state(&self, cursor: Cursor) -> Vec<f64> {
        let mut s = Vec::with_capacity(self.state_dim());
        for &b in &self.state_order {
            let row = self.bus_row(b, cursor);
            s.extend_from_slice(&[
                row.p_load,
                row.q_load,
                row.p_pv,
                row.q_pv_prev,
                row.v,
                row.omega,
            ]);
        }
        let mut one_hot = [0.0; 4];
        one_hot[cursor.season().index()] = 1.0;
        s.extend_from_slice(&one_hot);
        s
    }
}
