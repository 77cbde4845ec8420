//! Backward/forward-sweep power flow for radial feeders.

use num_complex::Complex64;

use crate::error::{GridError, Result};
use crate::topology::{validate_radial, FeederTopology, RadialIndex};

/// Per-bus complex power injections in p.u. (generation positive), aligned
/// with `FeederTopology::buses`. Slack entries are ignored by the solver.
#[derive(Debug, Clone)]
pub struct InjectionState {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl InjectionState {
    pub fn zeros(n: usize) -> Self {
        InjectionState { p: vec![0.0; n], q: vec![0.0; n] }
    }
}

/// Solved operating point.
#[derive(Debug, Clone)]
pub struct PowerFlowSolution {
    /// Voltage magnitude per bus, p.u.
    pub v_mag: Vec<f64>,
    /// Voltage phase per bus, radians.
    pub v_ang: Vec<f64>,
    /// Total active line loss, p.u.
    pub loss_p: f64,
    /// Power injected by the slack bus (balances the feeder), p.u.
    pub slack_p: f64,
    pub slack_q: f64,
    /// Worst nodal complex-power mismatch at the returned voltages, p.u.
    pub max_mismatch: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl PowerFlowSolution {
    fn new(n: usize) -> Self {
        PowerFlowSolution {
            v_mag: vec![1.0; n],
            v_ang: vec![0.0; n],
            loss_p: 0.0,
            slack_p: 0.0,
            slack_q: 0.0,
            max_mismatch: f64::INFINITY,
            iterations: 0,
            converged: false,
        }
    }
}

/// A validated feeder with its traversal order, ready for repeated solves.
#[derive(Debug, Clone)]
pub struct PreparedFeeder {
    topo: FeederTopology,
    index: RadialIndex,
    z_branch: Vec<Complex64>,
}

impl PreparedFeeder {
    pub fn new(topo: FeederTopology) -> Result<Self> {
        let index = validate_radial(&topo)?;
        let z_branch = topo
            .branches
            .iter()
            .map(|b| Complex64::new(b.r, b.x))
            .collect();
        Ok(PreparedFeeder { topo, index, z_branch })
    }

    pub fn topology(&self) -> &FeederTopology {
        &self.topo
    }

    /// Runs the sweep until the worst nodal mismatch is below `tol` or
    /// `max_iter` passes complete. Non-convergence is reported through the
    /// `converged` flag; a collapsing voltage (|v| < 0.3 p.u.) is an error.
    pub fn solve(
        &self,
        inj: &InjectionState,
        tol: f64,
        max_iter: usize,
    ) -> Result<PowerFlowSolution> {
        let n = self.topo.n_buses();
        if tol <= 0.0 {
            return Err(GridError::BadTolerance(tol));
        }
        if inj.p.len() != n || inj.q.len() != n {
            return Err(GridError::InjectionLength {
                expected: n,
                found: inj.p.len().min(inj.q.len()),
            });
        }
        for i in 0..n {
            if !inj.p[i].is_finite() || !inj.q[i].is_finite() {
                return Err(GridError::NonFiniteInjection(self.topo.buses[i].id));
            }
        }

        let slack = self.index.slack;
        let order = &self.index.order;
        let mut v = vec![Complex64::new(1.0, 0.0); n];
        // s[i]: net injection; the slack's is a free variable
        let s: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new(inj.p[i], inj.q[i]))
            .collect();

        let mut j_branch = vec![Complex64::new(0.0, 0.0); n];
        let mut sol = PowerFlowSolution::new(n);
        let mut mismatch = f64::INFINITY;

        for iter in 0..max_iter {
            // backward: demand currents, then accumulate leaves-to-root
            for &b in order.iter() {
                if b == slack {
                    j_branch[b] = Complex64::new(0.0, 0.0);
                } else {
                    j_branch[b] = ((-s[b]) / v[b]).conj();
                }
            }
            for &b in order.iter().rev() {
                if b == slack {
                    continue;
                }
                let p = self.index.parent[b].expect("non-slack bus has a parent");
                if p != slack {
                    let add = j_branch[b];
                    j_branch[p] += add;
                }
            }
            // forward: propagate voltage drops root-to-leaves
            for &b in order.iter() {
                if b == slack {
                    continue;
                }
                let p = self.index.parent[b].unwrap();
                let bi = self.index.parent_branch[b].unwrap();
                v[b] = v[p] - self.z_branch[bi] * j_branch[b];
                let vm = v[b].norm();
                if vm < 0.3 {
                    return Err(GridError::VoltageCollapse {
                        bus: self.topo.buses[b].id,
                        vmag: vm,
                    });
                }
            }
            sol.iterations = iter + 1;
            mismatch = self.max_mismatch(&v, &s, &j_branch);
            if mismatch < tol {
                sol.converged = true;
                break;
            }
        }

        for i in 0..n {
            sol.v_mag[i] = v[i].norm();
            sol.v_ang[i] = v[i].arg();
        }
        sol.v_mag[slack] = 1.0;
        sol.v_ang[slack] = 0.0;

        let mut loss = Complex64::new(0.0, 0.0);
        for &b in order.iter() {
            if b == slack {
                continue;
            }
            let bi = self.index.parent_branch[b].unwrap();
            loss += self.z_branch[bi] * j_branch[b].norm_sqr();
        }
        sol.loss_p = loss.re;

        let mut slack_power = Complex64::new(0.0, 0.0);
        for &b in order.iter() {
            if self.index.parent[b] == Some(slack) {
                slack_power += v[slack] * j_branch[b].conj();
            }
        }
        sol.slack_p = slack_power.re;
        sol.slack_q = slack_power.im;
        sol.max_mismatch = mismatch;
        Ok(sol)
    }

    /// Worst |S_spec - S_net(v)| over non-slack buses: the net current into
    /// each bus is its feeding branch current minus the child branch
    /// currents; the power it delivers must match the demand.
    fn max_mismatch(&self, v: &[Complex64], s: &[Complex64], j_branch: &[Complex64]) -> f64 {
        let n = self.topo.n_buses();
        let slack = self.index.slack;
        let mut child_sum = vec![Complex64::new(0.0, 0.0); n];
        for b in 0..n {
            if b == slack {
                continue;
            }
            let p = self.index.parent[b].unwrap();
            child_sum[p] += j_branch[b];
        }
        let mut worst: f64 = 0.0;
        for b in 0..n {
            if b == slack {
                continue;
            }
            let i_in = j_branch[b] - child_sum[b];
            let delivered = v[b] * i_in.conj();
            let demand = -s[b];
            worst = worst.max((demand - delivered).norm());
        }
        worst
    }
}

/// One-shot convenience: validate and solve.
pub fn solve_power_flow(
    topo: &FeederTopology,
    inj: &InjectionState,
    tol: f64,
    max_iter: usize,
) -> Result<PowerFlowSolution> {
    PreparedFeeder::new(topo.clone())?.solve(inj, tol, max_iter)
}
