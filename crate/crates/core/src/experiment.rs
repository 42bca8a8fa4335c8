//! Parameter sweeps, plot data and the hardness check, built from the other
//! modules.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::instance::{gen_hardness, Instance, Topology};
use crate::lp::{build_fairness_lp, build_profit_lp, scale_per_arrival, solve, LpSolution, ScaledSolution};
use crate::policies::{build_policy, PolicyConfig, PolicyKind};
use crate::simulator::{monte_carlo_with, DriverGroups, McOptions, MetricsRow};

/// `(1 − 1/e)/2`, the WarmUp guarantee per unit of α or β.
pub fn warmup_bound_unit() -> f64 {
    (1.0 - (-1.0f64).exp()) / 2.0
}

/// Both benchmark programs solved, with their per-arrival scalings.
#[derive(Debug, Clone)]
pub struct Benchmarks {
    pub profit: LpSolution,
    pub fairness: LpSolution,
    pub x: ScaledSolution,
    pub y: ScaledSolution,
}

impl Benchmarks {
    pub fn solve(instance: &Instance) -> Result<Self> {
        let profit = solve(&build_profit_lp(instance)?)?.require_optimal()?;
        let fairness = solve(&build_fairness_lp(instance)?)?.require_optimal()?;
        Ok(Benchmarks {
            x: scale_per_arrival(instance, &profit)?,
            y: scale_per_arrival(instance, &fairness)?,
            profit,
            fairness,
        })
    }

    pub fn opt_profit(&self) -> f64 {
        self.profit.objective_value
    }

    pub fn opt_fairness(&self) -> f64 {
        self.fairness.objective_value
    }
}

/// An instance prepared for one policy family: the topology the policy runs
/// on, its benchmarks, and the grouping back to the original driver types.
pub struct Prepared {
    pub topo: Topology,
    pub bench: Benchmarks,
    pub groups: Option<DriverGroups>,
}

/// AttenAlg runs on the unit-capacity expansion; everything else on the
/// instance itself. Ratios are always taken against the original instance's
/// benchmarks, which equal the expansion's.
pub fn prepare(instance: &Instance, kind: PolicyKind) -> Result<Prepared> {
    if kind != PolicyKind::Attenalg || instance.is_unit_capacity() {
        return Ok(Prepared {
            topo: instance.topology()?,
            bench: Benchmarks::solve(instance)?,
            groups: None,
        });
    }
    let (unit, origin) = instance.to_unit_capacity()?;
    let index: BTreeMap<&str, usize> = instance.drivers.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
    let group = unit.drivers.iter().map(|d| index[origin[&d.id].as_str()]).collect();
    Ok(Prepared {
        topo: unit.topology()?,
        bench: Benchmarks::solve(&unit)?,
        groups: Some(DriverGroups {
            group,
            capacity: instance.drivers.iter().map(|d| d.capacity).collect(),
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    pub policies: Vec<PolicyKind>,
    /// β = 1 − α at each grid point.
    pub alphas: Vec<f64>,
    pub n_trials: u64,
    pub seed: u64,
    pub attenuation_samples: u32,
    /// Reported in the `B` column.
    pub capacity_bound: u32,
}

pub fn run_sweep(instance: &Instance, config: &SweepConfig) -> Result<Vec<MetricsRow>> {
    if let Some(a) = config.alphas.iter().find(|a| !(0.0..=1.0).contains(*a)) {
        return Err(invalid("alphas", format!("{a} is outside [0,1]")));
    }
    let mut rows = Vec::new();
    let mut cache: BTreeMap<bool, Prepared> = BTreeMap::new();
    for &kind in &config.policies {
        let unit = kind == PolicyKind::Attenalg;
        if let std::collections::btree_map::Entry::Vacant(e) = cache.entry(unit) {
            e.insert(prepare(instance, kind)?);
        }
        let prep = &cache[&unit];
        let opts = McOptions {
            groups: prep.groups.clone(),
            ..Default::default()
        };
        let grid: Vec<f64> = if kind.is_greedy() { vec![0.0] } else { config.alphas.clone() };
        for alpha in grid {
            let beta = if kind.is_greedy() { 0.0 } else { 1.0 - alpha };
            let pc = PolicyConfig {
                kind,
                alpha,
                beta,
                attenuation_samples: config.attenuation_samples,
                seed: config.seed,
            };
            let policy = build_policy(&prep.topo, &pc, &prep.bench.x, &prep.bench.y)?;
            let metrics = monte_carlo_with(
                &prep.topo,
                policy.as_ref(),
                config.n_trials,
                config.seed,
                prep.bench.opt_profit(),
                prep.bench.opt_fairness(),
                &opts,
            )?;
            rows.push(MetricsRow {
                policy: kind.to_string(),
                alpha,
                beta,
                capacity_bound: config.capacity_bound,
                seed: config.seed,
                metrics,
            });
        }
    }
    Ok(rows)
}

pub const PLOT_COLUMNS: [&str; 9] = [
    "policy",
    "alpha",
    "beta",
    "profit_ratio",
    "profit_ratio_stderr",
    "fairness_ratio",
    "fairness_ratio_stderr",
    "profit_bound",
    "fairness_bound",
];

fn ratio_stderr(se: f64, ratio: Option<f64>, mean: f64) -> String {
    match ratio {
        Some(r) if mean > 0.0 => (se * r / mean).to_string(),
        Some(_) => "0".to_string(),
        None => "NA".to_string(),
    }
}

/// Series for the ratio-versus-α figure: measured ratios next to the
/// WarmUp lower-bound curves `α(1−1/e)/2` and `(1−α)(1−1/e)/2`.
pub fn write_plot_data<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(PLOT_COLUMNS).map_err(err)?;
    let c = warmup_bound_unit();
    for r in rows {
        let m = &r.metrics;
        let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        let (pb, fb) = if r.policy.starts_with("greedy") {
            ("NA".to_string(), "NA".to_string())
        } else {
            ((r.alpha * c).to_string(), ((1.0 - r.alpha) * c).to_string())
        };
        w.write_record([
            r.policy.clone(),
            r.alpha.to_string(),
            r.beta.to_string(),
            na(m.profit_ratio),
            ratio_stderr(m.profit_stderr, m.profit_ratio, m.profit_mean),
            na(m.fairness_ratio),
            ratio_stderr(m.fairness_stderr, m.fairness_ratio, m.fairness),
            pb,
            fb,
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

/// Standard error of a ratio whose denominator is exact.
pub fn scaled_stderr(stderr: f64, optimum: f64) -> f64 {
    if optimum > 0.0 {
        stderr / optimum
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolicyCheck {
    pub policy: String,
    pub alpha: f64,
    pub beta: f64,
    pub profit_ratio: f64,
    pub fairness_ratio: f64,
    /// Combined standard error of the ratio sum (profit and fairness errors
    /// added in quadrature).
    pub sum_stderr: f64,
    pub profit_stderr: f64,
    pub sum_ok: bool,
    pub profit_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardnessReport {
    pub n: u32,
    pub eps: f64,
    pub opt_profit: f64,
    pub opt_fairness: f64,
    pub opt_profit_ok: bool,
    pub opt_fairness_ok: bool,
    pub checks: Vec<PolicyCheck>,
}

impl HardnessReport {
    pub fn passed(&self) -> bool {
        self.opt_profit_ok && self.opt_fairness_ok && self.checks.iter().all(|c| c.sum_ok && c.profit_ok)
    }
}

/// Solves both programs on the hardness family and measures each policy's
/// ratios against the ceilings `1 + 2ε` (sum) and `1 − 1/e + ε` (profit).
pub fn verify_hardness(n: u32, eps: f64, policies: &[PolicyConfig], n_trials: u64, seed: u64) -> Result<HardnessReport> {
    let inst = gen_hardness(n, eps)?;
    let bench = Benchmarks::solve(&inst)?;
    let (op, of) = (bench.opt_profit(), bench.opt_fairness());
    let mut checks = Vec::new();
    for pc in policies {
        let prep = prepare(&inst, pc.kind)?;
        let policy = build_policy(&prep.topo, pc, &prep.bench.x, &prep.bench.y)?;
        let opts = McOptions {
            groups: prep.groups.clone(),
            ..Default::default()
        };
        let m = monte_carlo_with(&prep.topo, policy.as_ref(), n_trials, seed, op, of, &opts)?;
        let pr = m.profit_ratio.unwrap_or(0.0);
        let fr = m.fairness_ratio.unwrap_or(0.0);
        let pse = scaled_stderr(m.profit_stderr, op);
        let fse = scaled_stderr(m.fairness_stderr, of);
        let sse = (pse * pse + fse * fse).sqrt();
        checks.push(PolicyCheck {
            policy: pc.kind.to_string(),
            alpha: pc.alpha,
            beta: pc.beta,
            profit_ratio: pr,
            fairness_ratio: fr,
            sum_stderr: sse,
            profit_stderr: pse,
            sum_ok: pr + fr <= 1.0 + 2.0 * eps + 4.0 * sse,
            profit_ok: pr <= 1.0 - (-1.0f64).exp() + eps + 4.0 * pse,
        });
    }
    Ok(HardnessReport {
        n,
        eps,
        opt_profit: op,
        opt_fairness: of,
        opt_profit_ok: (op - f64::from(n)).abs() <= 1e-6,
        opt_fairness_ok: (of - eps / (1.0 + eps)).abs() <= 1e-6,
        checks,
    })
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut out = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation with average ranks for ties; `None` when
/// either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        None
    } else {
        Some(cov / (vx * vy).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_basics() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]), Some(1.0));
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[5.0, 5.0]), None);
        assert_eq!(ranks(&[2.0, 1.0, 2.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn bound_at_half() {
        assert!((0.5 * warmup_bound_unit() - 0.158030).abs() < 1e-6);
    }

    #[test]
    fn sweep_table_shape() {
        let inst = gen_hardness(2, 0.5).unwrap();
        let cfg = SweepConfig {
            policies: vec![PolicyKind::Warmup, PolicyKind::GreedyP, PolicyKind::GreedyF],
            alphas: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            n_trials: 200,
            seed: 1,
            attenuation_samples: 100,
            capacity_bound: 1,
        };
        let rows = run_sweep(&inst, &cfg).unwrap();
        assert_eq!(rows.len(), 7);
        assert_eq!(rows.iter().filter(|r| r.policy == "warmup").count(), 5);
        let mut buf = Vec::new();
        write_plot_data(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let half = text.lines().find(|l| l.starts_with("warmup\t0.5\t")).unwrap();
        let bound: f64 = half.split('\t').nth(7).unwrap().parse().unwrap();
        assert!((bound - 0.158030).abs() < 1e-6);
    }

    #[test]
    fn attenalg_on_general_capacity_reports_original_types() {
        let inst = crate::instance::tests::two_by_two();
        let prep = prepare(&inst, PolicyKind::Attenalg).unwrap();
        assert!(prep.topo.is_unit_capacity());
        let g = prep.groups.unwrap();
        assert_eq!(g.capacity, vec![2, 1]);
        assert_eq!(g.group, vec![0, 0, 1]);
    }

    #[test]
    fn hardness_report_small() {
        let r = verify_hardness(1, 0.5, &[PolicyConfig::new(PolicyKind::Warmup, 0.5, 0.5)], 2000, 3).unwrap();
        assert!((r.opt_fairness - 1.0 / 3.0).abs() < 1e-6);
        assert!(r.passed());
    }
}
