//! Independent oracles shared by the integration tests. Nothing here calls
//! into the solver, the rounding code or the exact evaluator.
#![allow(dead_code)]

use fairdispatch::instance::{Attributes, DriverType, Edge, Instance, RiderType};
use fairdispatch::lp::{LpModel, Relation};

/// Every constraint and finite bound as a row `a·x ≤ b`.
fn as_le_rows(model: &LpModel) -> Vec<(Vec<f64>, f64)> {
    let n = model.num_vars();
    let mut rows = Vec::new();
    for c in &model.constraints {
        match c.relation {
            Relation::Le => rows.push((c.coeffs.clone(), c.rhs)),
            Relation::Ge => rows.push((c.coeffs.iter().map(|a| -a).collect(), -c.rhs)),
            Relation::Eq => {
                rows.push((c.coeffs.clone(), c.rhs));
                rows.push((c.coeffs.iter().map(|a| -a).collect(), -c.rhs));
            }
        }
    }
    for (j, &(lo, hi)) in model.bounds.iter().enumerate() {
        let unit = |s: f64| {
            let mut a = vec![0.0; n];
            a[j] = s;
            a
        };
        if lo.is_finite() {
            rows.push((unit(-1.0), -lo));
        }
        if hi.is_finite() {
            rows.push((unit(1.0), hi));
        }
    }
    rows
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for k in col..n {
                        a[r][k] -= f * a[col][k];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Optimum of a bounded maximization LP by enumerating every basic point.
/// `None` when no vertex is feasible. Only for a handful of variables.
pub fn vertex_enumeration(model: &LpModel) -> Option<f64> {
    let n = model.num_vars();
    let rows = as_le_rows(model);
    let mut best: Option<f64> = None;
    for pick in combinations(rows.len(), n) {
        let a: Vec<Vec<f64>> = pick.iter().map(|&i| rows[i].0.clone()).collect();
        let b: Vec<f64> = pick.iter().map(|&i| rows[i].1).collect();
        let Some(x) = solve_square(a, b) else { continue };
        let feasible = rows
            .iter()
            .all(|(a, b)| a.iter().zip(&x).map(|(p, q)| p * q).sum::<f64>() <= b + 1e-7);
        if feasible {
            let obj: f64 = model.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
            best = Some(best.map_or(obj, |b: f64| b.max(obj)));
        }
    }
    best
}

pub fn is_feasible(model: &LpModel, x: &[f64], tol: f64) -> bool {
    as_le_rows(model)
        .iter()
        .all(|(a, b)| a.iter().zip(x).map(|(p, q)| p * q).sum::<f64>() <= b + tol)
}

/// Instance builder: `drivers = [(id, capacity)]`, `riders = [(id, rate,
/// patience)]`, `edges = [(driver, rider, p, w)]`; the horizon is the rate sum.
pub fn instance(drivers: &[(&str, u32)], riders: &[(&str, f64, u32)], edges: &[(&str, &str, f64, f64)]) -> Instance {
    let horizon: f64 = riders.iter().map(|r| r.1).sum();
    Instance {
        drivers: drivers
            .iter()
            .map(|&(id, capacity)| DriverType {
                id: id.into(),
                capacity,
                attributes: Attributes::new(),
            })
            .collect(),
        riders: riders
            .iter()
            .map(|&(id, arrival_rate, patience)| RiderType {
                id: id.into(),
                arrival_rate,
                patience,
                attributes: Attributes::new(),
            })
            .collect(),
        edges: edges
            .iter()
            .enumerate()
            .map(|(k, &(d, r, p, w))| Edge {
                id: format!("e{k}"),
                driver: d.into(),
                rider: r.into(),
                accept_prob: p,
                weight: w,
            })
            .collect(),
        horizon: horizon.round() as u32,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum GreedyRule {
    Profit,
    Fairness,
}

/// Brute-force expectation of a greedy baseline: walks every arrival
/// sequence and every accept/reject pattern without memoization. Returns
/// expected profit and expected matched count per driver.
pub fn greedy_brute_force(inst: &Instance, rule: GreedyRule) -> (f64, Vec<f64>) {
    let nu = inst.drivers.len();
    let total: f64 = inst.riders.iter().map(|r| r.arrival_rate).sum();
    let driver_of = |e: &Edge| inst.drivers.iter().position(|d| d.id == e.driver).unwrap();

    fn walk(
        inst: &Instance,
        rule: GreedyRule,
        total: f64,
        driver_of: &dyn Fn(&Edge) -> usize,
        t: u32,
        matched: &mut Vec<u32>,
        prob: f64,
        acc: &mut (f64, Vec<f64>),
    ) {
        if t == inst.horizon || prob == 0.0 {
            return;
        }
        for rider in &inst.riders {
            let q = rider.arrival_rate / total;
            if q == 0.0 {
                continue;
            }
            let mut cand: Vec<&Edge> = inst
                .edges
                .iter()
                .filter(|e| e.rider == rider.id && matched[driver_of(e)] < inst.drivers[driver_of(e)].capacity)
                .collect();
            cand.sort_by(|a, b| {
                let key = |e: &Edge| match rule {
                    GreedyRule::Profit => -e.weight * e.accept_prob,
                    GreedyRule::Fairness => {
                        let u = driver_of(e);
                        f64::from(matched[u]) / f64::from(inst.drivers[u].capacity)
                    }
                };
                key(a).partial_cmp(&key(b)).unwrap().then(a.id.cmp(&b.id))
            });
            cand.truncate(rider.patience as usize);
            let mut reach = prob * q;
            for e in cand {
                let u = driver_of(e);
                let w = reach * e.accept_prob;
                acc.0 += w * e.weight;
                acc.1[u] += w;
                matched[u] += 1;
                walk(inst, rule, total, driver_of, t + 1, matched, w, acc);
                matched[u] -= 1;
                reach *= 1.0 - e.accept_prob;
            }
            walk(inst, rule, total, driver_of, t + 1, matched, reach, acc);
        }
    }

    let mut acc = (0.0, vec![0.0; nu]);
    walk(inst, rule, total, &driver_of, 0, &mut vec![0; nu], 1.0, &mut acc);
    acc
}

/// The toy corpus used for exact-versus-Monte-Carlo checks; every instance
/// has `T ≤ 6`, at most three rider types and at most three edges per rider.
pub fn toy_corpus() -> Vec<(&'static str, Instance)> {
    vec![
        (
            "single-edge",
            instance(&[("u", 1)], &[("v", 2.0, 1)], &[("u", "v", 0.6, 1.0)]),
        ),
        (
            "two-drivers-shared-rider",
            instance(
                &[("a", 1), ("b", 2)],
                &[("v", 2.0, 2), ("w", 1.0, 1)],
                &[("a", "v", 0.5, 1.0), ("b", "v", 0.7, 0.4), ("b", "w", 0.9, 0.8)],
            ),
        ),
        (
            "hardness-n2",
            fairdispatch::instance::gen_hardness(2, 0.5).unwrap(),
        ),
        (
            "three-by-three",
            instance(
                &[("a", 1), ("b", 1), ("c", 1)],
                &[("x", 1.5, 2), ("y", 1.5, 1), ("z", 1.0, 3)],
                &[
                    ("a", "x", 0.4, 1.0),
                    ("b", "x", 0.8, 0.5),
                    ("b", "y", 0.6, 0.9),
                    ("c", "y", 0.3, 1.0),
                    ("a", "z", 0.5, 0.2),
                    ("b", "z", 0.5, 0.7),
                    ("c", "z", 0.9, 0.6),
                ],
            ),
        ),
        (
            "capacity-three",
            instance(
                &[("a", 3), ("b", 1)],
                &[("v", 3.5, 2), ("w", 2.5, 1)],
                &[("a", "v", 0.3, 1.0), ("b", "v", 0.6, 0.6), ("a", "w", 0.8, 0.3)],
            ),
        ),
        (
            "idle-rider",
            instance(
                &[("a", 1), ("b", 1)],
                &[("v", 3.0, 1), ("w", 0.0, 1)],
                &[("a", "v", 0.5, 1.0), ("b", "v", 0.5, 0.5), ("b", "w", 0.5, 1.0)],
            ),
        ),
    ]
}

/// `|mean − target| ≤ 4·stderr`, with a floor for exact zero variance.
pub fn within_4se(mean: f64, stderr: f64, target: f64) -> bool {
    (mean - target).abs() <= 4.0 * stderr + 1e-9
}

/// Prints the one-line verdict for an acceptance criterion.
pub fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    println!("criterion {id:>2} [{name}]: {} {detail}", if pass { "PASS" } else { "FAIL" });
}
