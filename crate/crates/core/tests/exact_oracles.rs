mod common;

use common::{greedy_brute_force, instance, toy_corpus, GreedyRule};
use fairdispatch::experiment::Benchmarks;
use fairdispatch::policies::{
    build_policy, calibrate_attenuation, make_schedule, AttenAlg, FleetState, Greedy, Policy, PolicyConfig, PolicyKind, ProbePlan, WarmUp,
};
use fairdispatch::simulator::{exact_eval, monte_carlo_with, McOptions};

#[test]
fn exact_greedy_matches_brute_force() {
    for (name, inst) in toy_corpus() {
        let topo = inst.topology().unwrap();
        for (kind, rule) in [(PolicyKind::GreedyP, GreedyRule::Profit), (PolicyKind::GreedyF, GreedyRule::Fairness)] {
            let g = Greedy::new(&topo, kind).unwrap();
            let exact = exact_eval(&topo, &g).unwrap();
            let (profit, matched) = greedy_brute_force(&inst, rule);
            assert!((exact.profit - profit).abs() < 1e-12, "{name} {kind}: {} vs {profit}", exact.profit);
            for (a, b) in exact.matched.iter().zip(&matched) {
                assert!((a - b).abs() < 1e-12, "{name} {kind}: {a} vs {b}");
            }
        }
    }
}

fn plan_marginals(policy: &dyn Policy, topo: &fairdispatch::instance::Topology, rider: usize) -> (Vec<f64>, f64) {
    let dist = policy.plan_distribution(topo, rider, 0, &FleetState::new(topo)).unwrap();
    let mut freq = vec![0.0; topo.num_edges()];
    let mut total = 0.0;
    for (plan, p) in &dist {
        total += p;
        for &f in plan.edges() {
            freq[f] += p;
        }
    }
    (freq, total)
}

#[test]
fn warmup_plan_marginals_follow_the_mixture() {
    for (name, inst) in toy_corpus() {
        let topo = inst.topology().unwrap();
        let bench = Benchmarks::solve(&inst).unwrap();
        let (zx, zy) = (bench.x.by_edge(topo.num_edges()), bench.y.by_edge(topo.num_edges()));
        for (alpha, beta) in [(1.0, 0.0), (0.3, 0.5), (0.0, 1.0)] {
            let cfg = PolicyConfig::new(PolicyKind::Warmup, alpha, beta);
            let w = WarmUp::new(&topo, &cfg, bench.x.clone(), bench.y.clone()).unwrap();
            for v in 0..topo.num_riders() {
                let (freq, total) = plan_marginals(&w, &topo, v);
                assert!((total - 1.0).abs() < 1e-12);
                for &f in &topo.rider_edges[v] {
                    let want = alpha * zx[f] + beta * zy[f];
                    assert!((freq[f] - want).abs() < 1e-9, "{name} ({alpha},{beta}) edge {f}: {} vs {want}", freq[f]);
                }
            }
        }
    }
}

#[test]
fn warmup_halves_always_probe_a_forced_edge() {
    let inst = instance(&[("u", 1)], &[("v", 1.0, 1)], &[("u", "v", 0.5, 1.0)]);
    let topo = inst.topology().unwrap();
    let bench = Benchmarks::solve(&inst).unwrap();
    let w = WarmUp::new(&topo, &PolicyConfig::new(PolicyKind::Warmup, 0.5, 0.5), bench.x, bench.y).unwrap();
    let dist = w.plan_distribution(&topo, 0, 0, &FleetState::new(&topo)).unwrap();
    let reject: f64 = dist.iter().filter(|(p, _)| *p == ProbePlan::Reject).map(|(_, q)| q).sum();
    assert_eq!(reject, 0.0);
}

#[test]
fn attenalg_edge_frequency_tracks_target() {
    // Unit patience: a plan holds at most one edge, so edge attenuation acts
    // on exactly the probe it was calibrated for.
    let inst = instance(
        &[("a", 1), ("b", 1)],
        &[("v", 2.5, 1), ("w", 1.5, 1)],
        &[("a", "v", 0.6, 1.0), ("b", "v", 0.5, 0.8), ("a", "w", 0.7, 0.9), ("b", "w", 0.4, 0.6)],
    );
    let topo = inst.topology().unwrap();
    let bench = Benchmarks::solve(&inst).unwrap();
    let alpha = 0.7;
    let mut cfg = PolicyConfig::new(PolicyKind::Attenalg, alpha, 0.0);
    cfg.attenuation_samples = 40_000;
    cfg.seed = 3;
    let schedule = make_schedule(topo.horizon).unwrap();
    let policy = build_policy(&topo, &cfg, &bench.x, &bench.y).unwrap();
    let table = calibrate_attenuation(&topo, &bench.x, &bench.y, &cfg, &schedule).unwrap();
    let attn = AttenAlg::new(&topo, &cfg, bench.x.clone(), bench.y.clone(), schedule.clone(), table.clone()).unwrap();

    let n = 100_000;
    let opts = McOptions {
        keep_records: true,
        ..Default::default()
    };
    let m = monte_carlo_with(&topo, policy.as_ref(), n, 17, 1.0, 1.0, &opts).unwrap();
    let m2 = monte_carlo_with(&topo, &attn, n, 17, 1.0, 1.0, &opts).unwrap();
    assert_eq!(m, m2);

    let zx = bench.x.by_edge(topo.num_edges());
    let horizon = topo.horizon as usize;
    let mut checked = 0;
    for t in 0..horizon {
        for f in 0..topo.num_edges() {
            let u = topo.edge_driver[f];
            let v = topo.edge_rider[f];
            let (vk, ek) = (table.vertex_keep[t][u], table.edge_keep[0][t][f]);
            // Clamped keep factors leave the probability below target.
            if zx[f] <= 0.0 || ek >= 1.0 || (t > 0 && vk >= 1.0) {
                continue;
            }
            let hits = m
                .records
                .iter()
                .filter(|r| r.rounds[t].probes.iter().any(|p| p.edge == f))
                .count();
            let freq = hits as f64 / n as f64;
            let target = topo.arrival_rate[v] / f64::from(topo.horizon) * alpha * schedule.gamma[t] * schedule.mu[t] * zx[f];
            let se_mc = (freq * (1.0 - freq) / n as f64).sqrt();
            let rel = |est: f64, se: f64| if est > 0.0 { se / est } else { 0.0 };
            let rel_cal = rel(table.vertex_estimate[t][u], table.vertex_stderr[t][u])
                .hypot(rel(table.edge_estimate[0][t][f], table.edge_stderr[0][t][f]));
            let tol = 4.0 * se_mc.hypot(target * rel_cal);
            assert!((freq - target).abs() <= tol, "t={} edge {f}: {freq} vs {target} (tol {tol})", t + 1);
            checked += 1;
        }
    }
    assert!(checked >= 4, "only {checked} unclamped entries");
}
