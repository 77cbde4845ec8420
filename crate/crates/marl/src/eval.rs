//! Exploration-free rollouts for validation and testing.

use tpa_env::{AvcEnv, Cursor};

use crate::agents::AgentSet;
use crate::error::Result;

/// Everything an evaluation needs from one rollout.
#[derive(Debug, Clone)]
pub struct EpisodeTrace {
    /// Voltage magnitude per step per bus (env bus order).
    pub v: Vec<Vec<f64>>,
    pub omega: Vec<Vec<f64>>,
    /// Dispatched reactive power per step per agent.
    pub q_pv: Vec<Vec<f64>>,
    pub p_inj: Vec<Vec<f64>>,
    pub q_inj: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// Season index of each step.
    pub seasons: Vec<usize>,
    pub converged: Vec<bool>,
}

/// Runs `steps` greedy steps from `start`. The env's episode length must
/// cover `steps`; memory windows carry across day boundaries within the
/// rollout (no resets).
pub fn rollout(
    env: &mut AvcEnv,
    agents: &AgentSet,
    start: Cursor,
    steps: usize,
) -> Result<EpisodeTrace> {
    let (mut obs, _state) = env.reset(start)?;
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
        let mut actions = Vec::with_capacity(agents.n_agents);
        for i in 0..agents.n_agents {
            actions.push(agents.act(i, &obs[i])?);
        }
        let result = env.step(&actions)?;
        trace.v.push(result.info.v.clone());
        trace.omega.push(result.info.omega.clone());
        trace.q_pv.push(result.info.q_pv.clone());
        trace.p_inj.push(result.info.p_inj.clone());
        trace.q_inj.push(result.info.q_inj.clone());
        trace.rewards.push(result.reward);
        trace.seasons.push(env.cursor().season().index());
        trace.converged.push(result.info.converged);
        obs = result.observations;
        if result.done {
            break;
        }
    }
    Ok(trace)
}
