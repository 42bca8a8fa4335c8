use rand::SeedableRng;

use super::*;
use crate::instance::{Attributes, DriverType, Edge, Instance, RiderType};
use crate::rounding::FractionalVector;

/// One rider with one edge per entry of `edges = [(p, w)]`, each to its own
/// unit-capacity driver.
fn star(edges: &[(f64, f64)], patience: u32, horizon: u32) -> Instance {
    Instance {
        drivers: (0..edges.len())
            .map(|i| DriverType {
                id: format!("u{i}"),
                capacity: 1,
                attributes: Attributes::new(),
            })
            .collect(),
        riders: vec![RiderType {
            id: "v".into(),
            arrival_rate: f64::from(horizon),
            patience,
            attributes: Attributes::new(),
        }],
        edges: edges
            .iter()
            .enumerate()
            .map(|(i, &(p, w))| Edge {
                id: format!("e{i}"),
                driver: format!("u{i}"),
                rider: "v".into(),
                accept_prob: p,
                weight: w,
            })
            .collect(),
        horizon,
    }
}

fn scaled(values: Vec<f64>) -> ScaledSolution {
    ScaledSolution {
        rider_edges: vec![(0..values.len()).collect()],
        values: vec![values],
    }
}

fn rng(seed: u64) -> PolicyRng {
    PolicyRng::seed_from_u64(seed)
}

#[test]
fn schedule_small_cases() {
    let s = make_schedule(2).unwrap();
    assert_eq!(s.gamma, vec![1.0, 0.75]);
    assert_eq!(s.mu, vec![0.5, 0.625]);
    let s = make_schedule(1).unwrap();
    assert_eq!((s.gamma, s.mu), (vec![1.0], vec![0.5]));
    assert!(make_schedule(0).is_err());
}

#[test]
fn schedule_recurrence_and_monotonicity() {
    let t = 50;
    let s = make_schedule(t).unwrap();
    for k in 0..s.horizon() {
        assert!((s.mu[k] - (1.0 - s.gamma[k] / 2.0)).abs() < 1e-12);
        if k + 1 < s.horizon() {
            assert!((s.gamma[k + 1] - s.gamma[k] * (1.0 - s.mu[k] / f64::from(t))).abs() < 1e-12);
            assert!(s.gamma[k + 1] < s.gamma[k]);
            assert!(s.mu[k + 1] > s.mu[k]);
        }
        assert!(s.gamma[k] > 0.0 && s.gamma[k] <= 1.0);
        assert!(s.mu[k] >= 0.5 && s.mu[k] < 1.0);
    }
}

#[test]
fn schedule_limit() {
    let target = (std::f64::consts::E - 1.0) / (std::f64::consts::E + 1.0);
    assert!((make_schedule(10_000).unwrap().mean_target() - target).abs() < 1e-3);
}

#[test]
fn config_validation() {
    assert!(PolicyConfig::new(PolicyKind::Warmup, 0.5, 0.5).validate().is_ok());
    assert!(PolicyConfig::new(PolicyKind::Warmup, 0.7, 0.4).validate().is_err());
    assert!(PolicyConfig::new(PolicyKind::Warmup, -0.1, 0.4).validate().is_err());
    assert!(PolicyConfig::new(PolicyKind::GreedyP, 0.7, 0.4).validate().is_ok());
    let mut c = PolicyConfig::new(PolicyKind::Attenalg, 0.5, 0.5);
    c.attenuation_samples = 0;
    assert!(c.validate().is_err());
    assert_eq!("greedy-p".parse::<PolicyKind>().unwrap(), PolicyKind::GreedyP);
    assert!("best".parse::<PolicyKind>().is_err());
}

#[test]
fn sr_degenerate_plans() {
    let inst = star(&[(0.5, 1.0), (0.5, 1.0)], 1, 1);
    let topo = inst.topology().unwrap();
    let state = FleetState::new(&topo);
    let zero = FractionalVector::new(vec![0, 1], vec![0.0, 0.0]).unwrap();
    assert_eq!(sr_probe(&topo, 0, &zero, &state, &mut rng(1)).unwrap(), ProbePlan::Reject);
    let forced = FractionalVector::new(vec![1], vec![1.0]).unwrap();
    assert_eq!(sr_probe(&topo, 0, &forced, &state, &mut rng(1)).unwrap(), ProbePlan::Probe(vec![1]));
    let mut busy = state.clone();
    busy.remaining[1] = 0;
    assert_eq!(sr_probe(&topo, 0, &forced, &busy, &mut rng(1)).unwrap(), ProbePlan::Reject);
    let foreign = FractionalVector::new(vec![7], vec![0.5]).unwrap();
    assert!(matches!(sr_probe(&topo, 0, &foreign, &state, &mut rng(1)), Err(Error::ForeignEdge { .. })));
}

#[test]
fn sr_head_is_symmetric() {
    let inst = star(&[(0.5, 1.0), (0.5, 1.0)], 2, 2);
    let topo = inst.topology().unwrap();
    let dist = sr_distribution(&topo, 0, &[0, 1], &[0.5, 0.5], |_| true).unwrap();
    let head0: f64 = dist.iter().filter(|(p, _)| p.first() == Some(&0)).map(|(_, q)| q).sum();
    assert!((head0 - 0.5).abs() < 1e-12);

    let state = FleetState::new(&topo);
    let z = FractionalVector::new(vec![0, 1], vec![0.5, 0.5]).unwrap();
    let mut r = rng(9);
    let n = 100_000;
    let hits = (0..n)
        .filter(|_| sr_probe(&topo, 0, &z, &state, &mut r).unwrap().edges().first() == Some(&0))
        .count();
    let se = (0.25 / n as f64).sqrt();
    assert!((hits as f64 / n as f64 - 0.5).abs() < 4.0 * se);
}

#[test]
fn sr_never_exceeds_patience() {
    let inst = star(&[(0.5, 1.0); 4], 2, 2);
    let topo = inst.topology().unwrap();
    // Sum slightly above Δ from LP round-off.
    let z = [0.5, 0.5, 0.5, 0.5 + 5e-10];
    let dist = sr_distribution(&topo, 0, &[0, 1, 2, 3], &z, |_| true).unwrap();
    assert!(dist.iter().all(|(p, _)| p.len() <= 2));
}

#[test]
fn warmup_branches() {
    let inst = star(&[(0.5, 1.0)], 1, 1);
    let topo = inst.topology().unwrap();
    let state = FleetState::new(&topo);
    let none = WarmUp::new(&topo, &PolicyConfig::new(PolicyKind::Warmup, 0.0, 0.0), scaled(vec![1.0]), scaled(vec![1.0])).unwrap();
    assert_eq!(none.plan_distribution(&topo, 0, 0, &state).unwrap(), vec![(ProbePlan::Reject, 1.0)]);
    let mut r = rng(3);
    assert!((0..100).all(|_| warmup_step(&none, &topo, 0, &state, &mut r).is_reject()));

    let half = WarmUp::new(&topo, &PolicyConfig::new(PolicyKind::Warmup, 0.5, 0.5), scaled(vec![1.0]), scaled(vec![1.0])).unwrap();
    let dist = half.plan_distribution(&topo, 0, 0, &state).unwrap();
    assert_eq!(dist.len(), 1);
    assert_eq!(dist[0].0, ProbePlan::Probe(vec![0]));
    assert!((dist[0].1 - 1.0).abs() < 1e-15);

    assert!(WarmUp::new(&topo, &PolicyConfig::new(PolicyKind::Warmup, 0.5, 0.5), scaled(vec![1.0, 0.0]), scaled(vec![1.0])).is_err());
}

#[test]
fn calibration_single_round() {
    let inst = star(&[(0.5, 1.0)], 1, 1);
    let topo = inst.topology().unwrap();
    let mut cfg = PolicyConfig::new(PolicyKind::Attenalg, 1.0, 0.0);
    cfg.attenuation_samples = 500;
    let schedule = make_schedule(1).unwrap();
    let x = scaled(vec![1.0]);
    let table = calibrate_attenuation(&topo, &x, &x, &cfg, &schedule).unwrap();
    assert_eq!(table.vertex_estimate[0], vec![1.0]);
    assert_eq!(table.vertex_keep[0], vec![1.0]);
    assert_eq!(table.edge_estimate[0][0], vec![1.0]);
    assert!((table.edge_keep[0][0][0] - 0.5).abs() < 1e-15);

    let alg = AttenAlg::new(&topo, &cfg, x.clone(), x, schedule, table.clone()).unwrap();
    let state = FleetState::new(&topo);
    let mut r = rng(5);
    let n = 100_000;
    let probes = (0..n).filter(|_| !alg.decide(&topo, 0, 0, &state, &mut r).plan.is_reject()).count();
    let se = (0.25 / n as f64).sqrt();
    assert!((probes as f64 / n as f64 - 0.5).abs() < 4.0 * se);

    let mut out = Vec::new();
    table.write_tsv(&topo, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("kind\tid\tt\testimate\tkeep_factor\n"));
    assert!(text.contains("edge_x\te0\t1\t1\t0.5"));
}

#[test]
fn calibration_rejects_general_capacity() {
    let mut inst = star(&[(0.5, 1.0)], 1, 1);
    inst.drivers[0].capacity = 2;
    let topo = inst.topology().unwrap();
    let x = scaled(vec![1.0]);
    let cfg = PolicyConfig::new(PolicyKind::Attenalg, 1.0, 0.0);
    assert!(matches!(
        calibrate_attenuation(&topo, &x, &x, &cfg, &make_schedule(1).unwrap()),
        Err(Error::NotUnitCapacity { .. })
    ));
}

#[test]
fn keep_factors_are_clamped() {
    let inst = crate::instance::tests::two_by_two().to_unit_capacity().unwrap().0;
    let topo = inst.topology().unwrap();
    let x = crate::lp::scale_per_arrival(&inst, &crate::lp::solve(&crate::lp::build_profit_lp(&inst).unwrap()).unwrap()).unwrap();
    let y = crate::lp::scale_per_arrival(&inst, &crate::lp::solve(&crate::lp::build_fairness_lp(&inst).unwrap()).unwrap()).unwrap();
    let mut cfg = PolicyConfig::new(PolicyKind::Attenalg, 0.5, 0.5);
    cfg.attenuation_samples = 300;
    let table = calibrate_attenuation(&topo, &x, &y, &cfg, &make_schedule(topo.horizon).unwrap()).unwrap();
    let all = table.vertex_keep.iter().chain(table.edge_keep.iter().flatten()).flatten();
    for k in all {
        assert!((0.0..=1.0).contains(k));
    }
    assert!(table.vertex_keep[0].iter().all(|&k| k == 1.0));
    let again = calibrate_attenuation(&topo, &x, &y, &cfg, &make_schedule(topo.horizon).unwrap()).unwrap();
    assert_eq!(table, again);
}

#[test]
fn greedy_orders() {
    let inst = star(&[(0.5, 0.8), (0.9, 0.6)], 1, 1);
    let topo = inst.topology().unwrap();
    let mut state = FleetState::new(&topo);
    let gp = Greedy::new(&topo, PolicyKind::GreedyP).unwrap();
    assert_eq!(greedy_step(&gp, &topo, 0, &state), ProbePlan::Probe(vec![1]));

    let mut inst2 = star(&[(0.5, 1.0), (0.5, 1.0)], 2, 2);
    inst2.drivers[1].capacity = 2;
    let topo2 = inst2.topology().unwrap();
    let mut st2 = FleetState::new(&topo2);
    st2.matched = vec![0, 1];
    st2.remaining = vec![1, 1];
    let gf = Greedy::new(&topo2, PolicyKind::GreedyF).unwrap();
    assert_eq!(greedy_step(&gf, &topo2, 0, &st2), ProbePlan::Probe(vec![0, 1]));
    st2.matched = vec![1, 0];
    st2.remaining = vec![1, 2];
    assert_eq!(greedy_step(&gf, &topo2, 0, &st2), ProbePlan::Probe(vec![1, 0]));

    state.remaining = vec![0, 0];
    assert_eq!(greedy_step(&gp, &topo, 0, &state), ProbePlan::Reject);
}

#[test]
fn greedy_ties_break_by_id() {
    let mut inst = star(&[(0.5, 1.0), (0.5, 1.0)], 1, 1);
    inst.edges[0].id = "zz".into();
    let topo = inst.topology().unwrap();
    let gp = Greedy::new(&topo, PolicyKind::GreedyP).unwrap();
    assert_eq!(greedy_step(&gp, &topo, 0, &FleetState::new(&topo)), ProbePlan::Probe(vec![1]));
}
