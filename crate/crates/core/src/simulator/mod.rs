//! The online process: KIID arrivals, sequential probing with acceptance
//! coins, capacity bookkeeping, and Monte Carlo aggregation.
//!
//! Every trial draws from three ChaCha streams derived from
//! `(master_seed, trial_index)`: one for arrivals, one for policy coins and
//! one for acceptance coins. Trials run in parallel and are folded in index
//! order, so results do not depend on the worker count.

mod exact;

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::instance::Topology;
use crate::policies::{FleetState, Policy};
use crate::seed::{stream_rng, ACCEPTANCE, ARRIVALS, POLICY};

pub use exact::{exact_eval, ExactResult, EXACT_MAX_EDGES_PER_RIDER, EXACT_MAX_HORIZON, EXACT_MAX_RIDERS};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub edge: usize,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub rider: usize,
    pub blocked: Vec<usize>,
    pub probes: Vec<Probe>,
    pub matched: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub rounds: Vec<RoundRecord>,
    pub matched: Vec<u32>,
    pub profit: f64,
}

impl TrialRecord {
    /// Availability of every driver at every round, before and after the
    /// round's vertex attenuation, indexed `[t][driver]`.
    pub fn availability(&self, topo: &Topology) -> (Vec<Vec<bool>>, Vec<Vec<bool>>) {
        let mut remaining = topo.capacity.clone();
        let mut pre = Vec::with_capacity(self.rounds.len());
        let mut post = Vec::with_capacity(self.rounds.len());
        for round in &self.rounds {
            let before: Vec<bool> = remaining.iter().map(|&r| r > 0).collect();
            let mut after = before.clone();
            for &u in &round.blocked {
                after[u] = false;
            }
            pre.push(before);
            post.push(after);
            if let Some(f) = round.matched {
                remaining[topo.edge_driver[f]] -= 1;
            }
        }
        (pre, post)
    }

    /// Line-delimited JSON with instance ids in place of indices.
    pub fn to_json_line(&self, topo: &Topology) -> String {
        let rounds: Vec<serde_json::Value> = self
            .rounds
            .iter()
            .enumerate()
            .map(|(t, r)| {
                serde_json::json!({
                    "t": t + 1,
                    "rider": topo.rider_ids[r.rider],
                    "blocked": r.blocked.iter().map(|&u| &topo.driver_ids[u]).collect::<Vec<_>>(),
                    "probes": r.probes.iter().map(|p| serde_json::json!({
                        "edge": topo.edge_ids[p.edge],
                        "accepted": p.accepted,
                    })).collect::<Vec<_>>(),
                    "matched": r.matched.map(|f| &topo.edge_ids[f]),
                })
            })
            .collect();
        let matched: serde_json::Map<String, serde_json::Value> = self
            .matched
            .iter()
            .enumerate()
            .map(|(u, &m)| (topo.driver_ids[u].clone(), m.into()))
            .collect();
        serde_json::json!({
            "trial": self.trial_index,
            "profit": self.profit,
            "matched": matched,
            "rounds": rounds,
        })
        .to_string()
    }
}

fn arrival_sampler(topo: &Topology) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(&topo.arrival_rate).map_err(|e| invalid("arrival_rate", e.to_string()))
}

fn trial(topo: &Topology, policy: &dyn Policy, arrivals: &WeightedIndex<f64>, master_seed: u64, index: u64) -> TrialRecord {
    let mut rng_arrival = stream_rng(master_seed, index, ARRIVALS);
    let mut rng_policy = stream_rng(master_seed, index, POLICY);
    let mut rng_accept = stream_rng(master_seed, index, ACCEPTANCE);
    let mut state = FleetState::new(topo);
    let mut rounds = Vec::with_capacity(topo.horizon as usize);
    let mut profit = 0.0;

    for t in 0..topo.horizon as usize {
        let v = arrivals.sample(&mut rng_arrival);
        let decision = policy.decide(topo, v, t, &state, &mut rng_policy);
        let plan = decision.plan.edges();
        assert!(plan.len() <= topo.patience[v] as usize, "plan longer than the rider's patience");
        let mut probes = Vec::with_capacity(plan.len());
        let mut matched = None;
        for &f in plan {
            assert_eq!(topo.edge_rider[f], v, "plan probes an edge of another rider");
            let u = topo.edge_driver[f];
            if state.remaining[u] == 0 {
                continue;
            }
            let accepted = rng_accept.random::<f64>() < topo.accept_prob[f];
            probes.push(Probe { edge: f, accepted });
            if accepted {
                state.remaining[u] -= 1;
                state.matched[u] += 1;
                profit += topo.weight[f];
                matched = Some(f);
                break;
            }
        }
        rounds.push(RoundRecord {
            rider: v,
            blocked: decision.blocked,
            probes,
            matched,
        });
    }
    for (u, &m) in state.matched.iter().enumerate() {
        assert!(m <= topo.capacity[u], "driver matched beyond capacity");
    }
    TrialRecord {
        trial_index: index,
        rounds,
        matched: state.matched,
        profit,
    }
}

pub fn run_trial(topo: &Topology, policy: &dyn Policy, master_seed: u64, trial_index: u64) -> Result<TrialRecord> {
    Ok(trial(topo, policy, &arrival_sampler(topo)?, master_seed, trial_index))
}

/// Maps drivers of an expanded (unit-capacity) instance back onto the
/// original driver types, so metrics are reported per original type.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverGroups {
    pub group: Vec<usize>,
    pub capacity: Vec<u32>,
}

#[derive(Debug, Clone, Default)]
pub struct McOptions {
    pub track_availability: bool,
    pub groups: Option<DriverGroups>,
    /// Keep every trial record (for the line-delimited JSON log).
    pub keep_records: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub n_trials: u64,
    pub profit_mean: f64,
    pub profit_stderr: f64,
    /// Mean matched count per driver.
    pub matched: Vec<MeanSe>,
    /// Mean matched count divided by capacity, per driver.
    pub rates: Vec<MeanSe>,
    /// Smallest mean rate and the driver attaining it.
    pub fairness: f64,
    pub fairness_stderr: f64,
    pub fairness_driver: usize,
    /// Mean over trials of the per-trial minimum rate (diagnostic only).
    pub per_trial_min_rate: f64,
    pub profit_ratio: Option<f64>,
    pub fairness_ratio: Option<f64>,
    /// `[t][driver]` availability before attenuation, when tracked.
    pub available: Option<Vec<Vec<MeanSe>>>,
    /// `[t][driver]` availability after attenuation, when tracked.
    pub available_after_attenuation: Option<Vec<Vec<MeanSe>>>,
    #[serde(skip)]
    pub records: Vec<TrialRecord>,
}

fn mean_se(xs: impl Iterator<Item = f64> + Clone) -> MeanSe {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    if n < 2.0 {
        return MeanSe { mean, stderr: 0.0 };
    }
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    MeanSe {
        mean,
        stderr: (var / n).sqrt(),
    }
}

/// `None` when the benchmark is zero (the ratio is undefined).
pub fn ratio(achieved: f64, optimum: f64) -> Option<f64> {
    if optimum > 1e-12 {
        Some(achieved / optimum)
    } else {
        None
    }
}

struct TrialSummary {
    profit: f64,
    matched: Vec<u32>,
    pre: Vec<Vec<bool>>,
    post: Vec<Vec<bool>>,
    record: Option<TrialRecord>,
}

pub fn monte_carlo(
    topo: &Topology,
    policy: &dyn Policy,
    n_trials: u64,
    master_seed: u64,
    lp_profit_opt: f64,
    lp_fairness_opt: f64,
) -> Result<Metrics> {
    monte_carlo_with(topo, policy, n_trials, master_seed, lp_profit_opt, lp_fairness_opt, &McOptions::default())
}

pub fn monte_carlo_with(
    topo: &Topology,
    policy: &dyn Policy,
    n_trials: u64,
    master_seed: u64,
    lp_profit_opt: f64,
    lp_fairness_opt: f64,
    options: &McOptions,
) -> Result<Metrics> {
    if n_trials == 0 {
        return Err(invalid("n_trials", "must be at least 1"));
    }
    let arrivals = arrival_sampler(topo)?;
    let (ngroups, group_of, capacity) = match &options.groups {
        Some(g) => {
            if g.group.len() != topo.num_drivers() || g.group.iter().any(|&k| k >= g.capacity.len()) {
                return Err(Error::DimensionMismatch("driver groups do not cover the drivers".into()));
            }
            (g.capacity.len(), g.group.clone(), g.capacity.clone())
        }
        None => (topo.num_drivers(), (0..topo.num_drivers()).collect(), topo.capacity.clone()),
    };

    let summaries: Vec<TrialSummary> = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let rec = trial(topo, policy, &arrivals, master_seed, i);
            let mut matched = vec![0u32; ngroups];
            for (u, &m) in rec.matched.iter().enumerate() {
                matched[group_of[u]] += m;
            }
            let (pre, post) = if options.track_availability {
                rec.availability(topo)
            } else {
                (Vec::new(), Vec::new())
            };
            TrialSummary {
                profit: rec.profit,
                matched,
                pre,
                post,
                record: options.keep_records.then_some(rec),
            }
        })
        .collect();

    let profit = mean_se(summaries.iter().map(|s| s.profit));
    let matched: Vec<MeanSe> = (0..ngroups)
        .map(|u| mean_se(summaries.iter().map(move |s| f64::from(s.matched[u]))))
        .collect();
    let rates: Vec<MeanSe> = matched
        .iter()
        .zip(&capacity)
        .map(|(m, &b)| MeanSe {
            mean: m.mean / f64::from(b),
            stderr: m.stderr / f64::from(b),
        })
        .collect();
    let (fairness_driver, fairness, fairness_stderr) = rates
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY, 0.0), |best, (u, r)| if r.mean < best.1 { (u, r.mean, r.stderr) } else { best });
    let fairness = if fairness.is_finite() { fairness } else { 0.0 };
    let per_trial_min_rate = summaries
        .iter()
        .map(|s| {
            s.matched
                .iter()
                .zip(&capacity)
                .map(|(&m, &b)| f64::from(m) / f64::from(b))
                .fold(f64::INFINITY, f64::min)
        })
        .map(|m| if m.is_finite() { m } else { 0.0 })
        .sum::<f64>()
        / n_trials as f64;

    let availability = |pick: fn(&TrialSummary) -> &Vec<Vec<bool>>| -> Vec<Vec<MeanSe>> {
        (0..topo.horizon as usize)
            .map(|t| {
                (0..topo.num_drivers())
                    .map(|u| mean_se(summaries.iter().map(move |s| f64::from(u8::from(pick(s)[t][u])))))
                    .collect()
            })
            .collect()
    };
    let (available, available_after_attenuation) = if options.track_availability {
        (Some(availability(|s| &s.pre)), Some(availability(|s| &s.post)))
    } else {
        (None, None)
    };

    Ok(Metrics {
        n_trials,
        profit_mean: profit.mean,
        profit_stderr: profit.stderr,
        profit_ratio: ratio(profit.mean, lp_profit_opt),
        fairness_ratio: ratio(fairness, lp_fairness_opt),
        matched,
        rates,
        fairness,
        fairness_stderr,
        fairness_driver,
        per_trial_min_rate,
        available,
        available_after_attenuation,
        records: summaries.into_iter().filter_map(|s| s.record).collect(),
    })
}

/// One line of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRow {
    pub policy: String,
    pub alpha: f64,
    pub beta: f64,
    /// Capacity bound of the generator, or the largest capacity.
    pub capacity_bound: u32,
    pub seed: u64,
    pub metrics: Metrics,
}

pub const METRICS_COLUMNS: [&str; 12] = [
    "policy",
    "alpha",
    "beta",
    "B",
    "n_trials",
    "profit_mean",
    "profit_stderr",
    "profit_ratio",
    "fairness",
    "fairness_stderr",
    "fairness_ratio",
    "seed",
];

fn opt_str(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

pub fn write_metrics_tsv<W: Write>(rows: &[MetricsRow], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(METRICS_COLUMNS).map_err(err)?;
    for r in rows {
        let m = &r.metrics;
        w.write_record([
            r.policy.clone(),
            r.alpha.to_string(),
            r.beta.to_string(),
            r.capacity_bound.to_string(),
            m.n_trials.to_string(),
            m.profit_mean.to_string(),
            m.profit_stderr.to_string(),
            opt_str(m.profit_ratio),
            m.fairness.to_string(),
            m.fairness_stderr.to_string(),
            opt_str(m.fairness_ratio),
            r.seed.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_trial_log<W: Write>(topo: &Topology, records: &[TrialRecord], mut out: W) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "{}", r.to_json_line(topo))?;
    }
    Ok(())
}
