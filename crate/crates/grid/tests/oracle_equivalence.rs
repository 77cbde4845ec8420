//! Sweep solver vs independent dense Newton-Raphson on random radial
//! feeders, plus residual self-checks.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use tpa_grid::oracle::solve_newton;
use tpa_grid::{BranchSpec, BusSpec, FeederTopology, InjectionState, PreparedFeeder};

/// Random radial feeder: each bus after the slack attaches to a uniformly
/// chosen earlier bus, giving arbitrary tree shapes.
pub fn random_feeder(rng: &mut StdRng, n_buses: usize) -> FeederTopology {
    let buses: Vec<BusSpec> = (0..n_buses)
        .map(|id| BusSpec {
            id,
            zone: if id == 0 { None } else { Some(0) },
            load: id != 0,
            pv: false,
            s_max: None,
        })
        .collect();
    let branches: Vec<BranchSpec> = (1..n_buses)
        .map(|id| BranchSpec {
            from: rng.gen_range(0..id),
            to: id,
            r: rng.gen_range(0.002..0.02),
            x: rng.gen_range(0.004..0.04),
        })
        .collect();
    FeederTopology {
        base_mva: 1.0,
        slack_bus: 0,
        buses,
        branches,
    }
}

pub fn random_injections(rng: &mut StdRng, n: usize) -> InjectionState {
    let mut inj = InjectionState::zeros(n);
    for i in 1..n {
        // mixed load/generation keeps the operating point nontrivial
        inj.p[i] = rng.gen_range(-0.05..0.02);
        inj.q[i] = rng.gen_range(-0.02..0.01);
    }
    inj
}

#[test]
fn sweep_matches_newton_on_random_feeders() {
    let mut rng = StdRng::seed_from_u64(20);
    for case in 0..100 {
        let n = rng.gen_range(3..=20);
        let topo = random_feeder(&mut rng, n);
        let inj = random_injections(&mut rng, n);
        let feeder = PreparedFeeder::new(topo.clone()).unwrap();

        let sweep = feeder.solve(&inj, 1e-10, 100).unwrap();
        assert!(sweep.converged, "case {case}: sweep did not converge");
        let newton = solve_newton(&topo, &inj, 1e-10, 50).unwrap();
        assert!(newton.converged, "case {case}: newton did not converge");

        for i in 0..n {
            let dv = (sweep.v_mag[i] - newton.v_mag[i]).abs();
            assert!(dv < 1e-6, "case {case} bus {i}: |dv| = {dv:.2e}");
            let da = (sweep.v_ang[i] - newton.v_ang[i]).abs();
            assert!(da < 1e-6, "case {case} bus {i}: |dang| = {da:.2e}");
        }
    }
}

#[test]
fn residual_self_check_on_random_feeders() {
    let mut rng = StdRng::seed_from_u64(21);
    for case in 0..100 {
        let n = rng.gen_range(3..=20);
        let topo = random_feeder(&mut rng, n);
        let inj = random_injections(&mut rng, n);
        let feeder = PreparedFeeder::new(topo).unwrap();
        let sol = feeder.solve(&inj, 1e-8, 100).unwrap();
        assert!(sol.converged, "case {case}");
        assert!(
            sol.max_mismatch < 1e-8,
            "case {case}: mismatch {:.2e}",
            sol.max_mismatch
        );
    }
}

#[test]
fn conservation_on_random_feeders() {
    let mut rng = StdRng::seed_from_u64(22);
    let tol = 1e-10;
    for case in 0..50 {
        let n = rng.gen_range(3..=20);
        let topo = random_feeder(&mut rng, n);
        let inj = random_injections(&mut rng, n);
        let feeder = PreparedFeeder::new(topo).unwrap();
        let sol = feeder.solve(&inj, tol, 100).unwrap();
        assert!(sol.converged);
        let injected: f64 = inj.p.iter().sum::<f64>() + sol.slack_p;
        assert!(
            (injected - sol.loss_p).abs() < 10.0 * tol,
            "case {case}: generation-load-loss imbalance {:.2e}",
            injected - sol.loss_p
        );
    }
}

#[test]
fn two_bus_hand_case_matches_newton() {
    // branch z = 0.01 + j0.02, load 0.1 + j0.05
    let topo = FeederTopology {
        base_mva: 1.0,
        slack_bus: 0,
        buses: vec![
            BusSpec { id: 0, zone: None, load: false, pv: false, s_max: None },
            BusSpec { id: 1, zone: Some(0), load: true, pv: false, s_max: None },
        ],
        branches: vec![BranchSpec { from: 0, to: 1, r: 0.01, x: 0.02 }],
    };
    let mut inj = InjectionState::zeros(2);
    inj.p[1] = -0.1;
    inj.q[1] = -0.05;
    let sweep = tpa_grid::solve_power_flow(&topo, &inj, 1e-10, 100).unwrap();
    let newton = solve_newton(&topo, &inj, 1e-12, 50).unwrap();
    assert!(sweep.converged && newton.converged);
    assert!((sweep.v_mag[1] - newton.v_mag[1]).abs() < 1e-6);
    assert!(sweep.v_mag[1] < 1.0);
}
