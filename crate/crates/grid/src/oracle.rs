//! Dense Newton-Raphson power flow, kept as an independent reference
//! implementation for testing the sweep solver (`oracle` feature only).
//!
//! Works from the bus admittance matrix in polar form, so it shares no code
//! path with the backward/forward sweep.

use num_complex::Complex64;

use crate::error::{GridError, Result};
use crate::sweep::InjectionState;
use crate::topology::FeederTopology;

/// Newton solution: voltage magnitudes and angles per bus.
#[derive(Debug, Clone)]
pub struct NewtonSolution {
    pub v_mag: Vec<f64>,
    pub v_ang: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn build_ybus(topo: &FeederTopology) -> Vec<Complex64> {
    let n = topo.n_buses();
    let mut y = vec![Complex64::new(0.0, 0.0); n * n];
    for br in &topo.branches {
        let f = topo.index_of(br.from).expect("validated topology");
        let t = topo.index_of(br.to).expect("validated topology");
        let adm = Complex64::new(1.0, 0.0) / Complex64::new(br.r, br.x);
        y[f * n + f] += adm;
        y[t * n + t] += adm;
        y[f * n + t] -= adm;
        y[t * n + f] -= adm;
    }
    y
}

/// Gaussian elimination with partial pivoting; `a` is `n x n`, `b` length n.
fn solve_dense(mut a: Vec<f64>, mut b: Vec<f64>, n: usize) -> Option<Vec<f64>> {
    for col in 0..n {
        let mut piv = col;
        let mut best = a[col * n + col].abs();
        for row in col + 1..n {
            let cand = a[row * n + col].abs();
            if cand > best {
                best = cand;
                piv = row;
            }
        }
        if best < 1e-14 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                a.swap(col * n + k, piv * n + k);
            }
            b.swap(col, piv);
        }
        let diag = a[col * n + col];
        for row in col + 1..n {
            let factor = a[row * n + col] / diag;
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row * n + k] -= factor * a[col * n + k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in row + 1..n {
            acc -= a[row * n + k] * x[k];
        }
        x[row] = acc / a[row * n + row];
    }
    Some(x)
}

/// Full Newton-Raphson solve of the same nodal equations the sweep targets.
/// All non-slack buses are PQ; the slack is held at 1.0 p.u., 0 rad.
pub fn solve_newton(
    topo: &FeederTopology,
    inj: &InjectionState,
    tol: f64,
    max_iter: usize,
) -> Result<NewtonSolution> {
    let n = topo.n_buses();
    if tol <= 0.0 {
        return Err(GridError::BadTolerance(tol));
    }
    let slack = topo
        .index_of(topo.slack_bus)
        .ok_or(GridError::MissingSlack(topo.slack_bus))?;
    let y = build_ybus(topo);
    let g = |i: usize, k: usize| y[i * n + k].re;
    let b = |i: usize, k: usize| y[i * n + k].im;

    let pq: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let m = pq.len();
    let mut v = vec![1.0; n];
    let mut th = vec![0.0; n];

    let calc = |v: &[f64], th: &[f64], i: usize| -> (f64, f64) {
        let mut p = 0.0;
        let mut q = 0.0;
        for k in 0..n {
            let d = th[i] - th[k];
            p += v[i] * v[k] * (g(i, k) * d.cos() + b(i, k) * d.sin());
            q += v[i] * v[k] * (g(i, k) * d.sin() - b(i, k) * d.cos());
        }
        (p, q)
    };

    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..max_iter {
        iterations = iter + 1;
        let mut resid = vec![0.0; 2 * m];
        let mut worst: f64 = 0.0;
        for (row, &i) in pq.iter().enumerate() {
            let (p_calc, q_calc) = calc(&v, &th, i);
            let dp = inj.p[i] - p_calc;
            let dq = inj.q[i] - q_calc;
            resid[row] = dp;
            resid[m + row] = dq;
            worst = worst.max((dp * dp + dq * dq).sqrt());
        }
        if worst < tol {
            converged = true;
            break;
        }

        // jacobian rows: [dP/dth, dP/dV; dQ/dth, dQ/dV]
        let dim = 2 * m;
        let mut jac = vec![0.0; dim * dim];
        for (row, &i) in pq.iter().enumerate() {
            let (p_calc, q_calc) = calc(&v, &th, i);
            for (col, &j) in pq.iter().enumerate() {
                if i == j {
                    jac[row * dim + col] = -q_calc - b(i, i) * v[i] * v[i];
                    jac[row * dim + m + col] = p_calc / v[i] + g(i, i) * v[i];
                    jac[(m + row) * dim + col] = p_calc - g(i, i) * v[i] * v[i];
                    jac[(m + row) * dim + m + col] = q_calc / v[i] - b(i, i) * v[i];
                } else {
                    let d = th[i] - th[j];
                    jac[row * dim + col] =
                        v[i] * v[j] * (g(i, j) * d.sin() - b(i, j) * d.cos());
                    jac[row * dim + m + col] =
                        v[i] * (g(i, j) * d.cos() + b(i, j) * d.sin());
                    jac[(m + row) * dim + col] =
                        -v[i] * v[j] * (g(i, j) * d.cos() + b(i, j) * d.sin());
                    jac[(m + row) * dim + m + col] =
                        v[i] * (g(i, j) * d.sin() - b(i, j) * d.cos());
                }
            }
        }
        let dx = solve_dense(jac, resid, dim).ok_or(GridError::VoltageCollapse {
            bus: topo.buses[slack].id,
            vmag: 0.0,
        })?;
        for (col, &j) in pq.iter().enumerate() {
            th[j] += dx[col];
            v[j] += dx[m + col];
        }
    }

    Ok(NewtonSolution {
        v_mag: v,
        v_ang: th,
        iterations,
        converged,
    })
}
