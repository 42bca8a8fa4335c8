//! AttenAlg and the Monte Carlo calibration of its keep-factors.
//!
//! Calibration carries `attenuation_samples` simulated trajectories forward
//! round by round. At round `t` the trajectories give the availability
//! estimate `â(u,t)`, which fixes the vertex keep-factor `min(1, γ_t/â)`.
//! With that attenuation in place, every rider and branch is run through SR
//! without edge attenuation to estimate `p̂(f,t)`, the chance that `f` is
//! probed given its driver is available, and the edge keep-factor becomes
//! `min(1, μ_t z_f/p̂)`. Only then are the trajectories advanced through
//! round `t` with the completed row.

use std::io::Write;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sr::sr_plan;
use super::{check_scaled, pick_branch, Branch, Decision, FleetState, Policy, PolicyConfig, PolicyKind, PolicyRng, ProbePlan, Schedule};
use crate::error::{invalid, Error, Result};
use crate::instance::Topology;
use crate::lp::ScaledSolution;
use crate::seed::{stream_rng, CALIBRATE_ADVANCE, CALIBRATE_ESTIMATE};

/// Rows are indexed `[t][driver]` and `[branch][t][edge]`, `t` zero-based;
/// branch 0 follows the profit solution and branch 1 the fairness solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttenuationTable {
    pub samples: u32,
    pub vertex_estimate: Vec<Vec<f64>>,
    pub vertex_stderr: Vec<Vec<f64>>,
    pub vertex_keep: Vec<Vec<f64>>,
    pub edge_estimate: [Vec<Vec<f64>>; 2],
    pub edge_stderr: [Vec<Vec<f64>>; 2],
    pub edge_keep: [Vec<Vec<f64>>; 2],
}

impl AttenuationTable {
    pub fn horizon(&self) -> usize {
        self.vertex_keep.len()
    }

    /// All keep-factors 1: AttenAlg then behaves like WarmUp.
    pub fn neutral(topo: &Topology) -> Self {
        let t = topo.horizon as usize;
        let v = vec![vec![1.0; topo.num_drivers()]; t];
        let e = vec![vec![1.0; topo.num_edges()]; t];
        let zv = vec![vec![0.0; topo.num_drivers()]; t];
        let ze = vec![vec![0.0; topo.num_edges()]; t];
        AttenuationTable {
            samples: 0,
            vertex_estimate: v.clone(),
            vertex_stderr: zv,
            vertex_keep: v,
            edge_estimate: [e.clone(), e.clone()],
            edge_stderr: [ze.clone(), ze],
            edge_keep: [e.clone(), e],
        }
    }

    fn check(&self, topo: &Topology) -> Result<()> {
        let t = topo.horizon as usize;
        let ok = self.vertex_keep.len() == t
            && self.vertex_keep.iter().all(|r| r.len() == topo.num_drivers())
            && self.edge_keep.iter().all(|b| b.len() == t && b.iter().all(|r| r.len() == topo.num_edges()));
        if ok {
            Ok(())
        } else {
            Err(Error::PolicyNotReady("attenuation table does not cover every round".into()))
        }
    }

    /// Largest standard error over all recorded estimates.
    pub fn max_stderr(&self) -> f64 {
        self.vertex_stderr
            .iter()
            .chain(self.edge_stderr.iter().flatten())
            .flatten()
            .fold(0.0, |a: f64, &b| a.max(b))
    }

    /// Tab-separated audit dump with columns `kind, id, t, estimate,
    /// keep_factor`; `t` is one-based.
    pub fn write_tsv<W: Write>(&self, topo: &Topology, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(out);
        let io = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(["kind", "id", "t", "estimate", "keep_factor"]).map_err(io)?;
        for (t, (est, keep)) in self.vertex_estimate.iter().zip(&self.vertex_keep).enumerate() {
            for (u, (a, k)) in est.iter().zip(keep).enumerate() {
                w.write_record(["vertex", &topo.driver_ids[u], &(t + 1).to_string(), &a.to_string(), &k.to_string()])
                    .map_err(io)?;
            }
        }
        for (b, kind) in ["edge_x", "edge_y"].iter().enumerate() {
            for (t, (est, keep)) in self.edge_estimate[b].iter().zip(&self.edge_keep[b]).enumerate() {
                for (f, (p, k)) in est.iter().zip(keep).enumerate() {
                    w.write_record([*kind, topo.edge_ids[f].as_str(), &(t + 1).to_string(), &p.to_string(), &k.to_string()])
                        .map_err(io)?;
                }
            }
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }
}

/// Shared body of an AttenAlg round: vertex attenuation, branch choice, SR
/// over unblocked available drivers, then edge attenuation on the plan.
#[allow(clippy::too_many_arguments)]
fn attenuated_round(
    topo: &Topology,
    alpha: f64,
    beta: f64,
    sols: [&ScaledSolution; 2],
    vertex_keep: &[f64],
    edge_keep: [&[f64]; 2],
    rider: usize,
    available: impl Fn(usize) -> bool,
    rng: &mut PolicyRng,
) -> (Vec<usize>, Vec<usize>) {
    let mut blocked = Vec::new();
    let mut mask = vec![false; topo.num_drivers()];
    for (u, &k) in vertex_keep.iter().enumerate() {
        if k < 1.0 && available(u) && rng.random::<f64>() >= k {
            mask[u] = true;
            blocked.push(u);
        }
    }
    let b = match pick_branch(alpha, beta, rng) {
        None => return (Vec::new(), blocked),
        Some(Branch::Profit) => 0,
        Some(Branch::Fairness) => 1,
    };
    let (edges, z) = sols[b].rider(rider);
    let mut plan = sr_plan(topo, rider, edges, z, |u| available(u) && !mask[u], rng);
    plan.retain(|&f| {
        let k = edge_keep[b][f];
        k >= 1.0 || rng.random::<f64>() < k
    });
    (plan, blocked)
}

#[derive(Default)]
struct Counts {
    denom: Vec<u64>,
    probed: [Vec<u64>; 2],
}

impl Counts {
    fn zero(edges: usize) -> Self {
        Counts {
            denom: vec![0; edges],
            probed: [vec![0; edges], vec![0; edges]],
        }
    }

    fn merge(mut self, other: Counts) -> Counts {
        for (a, b) in self.denom.iter_mut().zip(other.denom) {
            *a += b;
        }
        for k in 0..2 {
            for (a, b) in self.probed[k].iter_mut().zip(&other.probed[k]) {
                *a += b;
            }
        }
        self
    }
}

/// Fills an [`AttenuationTable`] for a unit-capacity topology.
pub fn calibrate_attenuation(
    topo: &Topology,
    x: &ScaledSolution,
    y: &ScaledSolution,
    config: &PolicyConfig,
    schedule: &Schedule,
) -> Result<AttenuationTable> {
    config.validate()?;
    if let Some(u) = (0..topo.num_drivers()).find(|&u| topo.capacity[u] != 1) {
        return Err(Error::NotUnitCapacity {
            driver: topo.driver_ids[u].clone(),
            capacity: topo.capacity[u],
        });
    }
    check_scaled(topo, "scaled_x", x)?;
    check_scaled(topo, "scaled_y", y)?;
    if schedule.horizon() != topo.horizon as usize {
        return Err(invalid("schedule", "length differs from the instance horizon"));
    }
    let arrivals = WeightedIndex::new(&topo.arrival_rate).map_err(|e| invalid("arrival_rate", e.to_string()))?;

    let n_samples = config.attenuation_samples as usize;
    let horizon = topo.horizon as usize;
    let (nu, ne) = (topo.num_drivers(), topo.num_edges());
    let sols = [x, y];
    let weights = [config.alpha, config.beta];
    let z_by_edge = [x.by_edge(ne), y.by_edge(ne)];

    let mut table = AttenuationTable::neutral(topo);
    table.samples = config.attenuation_samples;
    let mut states = vec![vec![true; nu]; n_samples];
    let s_f = n_samples as f64;

    for t in 0..horizon {
        let (gamma, mu) = (schedule.gamma[t], schedule.mu[t]);
        for u in 0..nu {
            let a = states.iter().filter(|s| s[u]).count() as f64 / s_f;
            table.vertex_estimate[t][u] = a;
            table.vertex_stderr[t][u] = (a * (1.0 - a) / s_f).sqrt();
            table.vertex_keep[t][u] = if a > 0.0 { (gamma / a).min(1.0) } else { 1.0 };
        }

        let vkeep = &table.vertex_keep[t];
        let counts = states
            .par_iter()
            .enumerate()
            .fold(
                || Counts::zero(ne),
                |mut c, (s, avail)| {
                    let mut rng = stream_rng(config.seed, (t * n_samples + s) as u64, CALIBRATE_ESTIMATE);
                    let eff: Vec<bool> = (0..nu)
                        .map(|u| avail[u] && (vkeep[u] >= 1.0 || rng.random::<f64>() < vkeep[u]))
                        .collect();
                    for f in 0..ne {
                        c.denom[f] += u64::from(eff[topo.edge_driver[f]]);
                    }
                    for b in 0..2 {
                        if weights[b] <= 0.0 {
                            continue;
                        }
                        for v in 0..topo.num_riders() {
                            let (edges, z) = sols[b].rider(v);
                            for f in sr_plan(topo, v, edges, z, |u| eff[u], &mut rng) {
                                c.probed[b][f] += 1;
                                if rng.random::<f64>() < topo.accept_prob[f] {
                                    break;
                                }
                            }
                        }
                    }
                    c
                },
            )
            .reduce(|| Counts::zero(ne), Counts::merge);

        for b in 0..2 {
            for f in 0..ne {
                let d = counts.denom[f];
                let p = if d > 0 { counts.probed[b][f] as f64 / d as f64 } else { 0.0 };
                table.edge_estimate[b][t][f] = p;
                table.edge_stderr[b][t][f] = if d > 0 { (p * (1.0 - p) / d as f64).sqrt() } else { 0.0 };
                let target = mu * z_by_edge[b][f];
                table.edge_keep[b][t][f] = if p > 0.0 && target > 0.0 { (target / p).min(1.0) } else { 1.0 };
            }
        }

        let vkeep = &table.vertex_keep[t];
        let ekeep = [table.edge_keep[0][t].as_slice(), table.edge_keep[1][t].as_slice()];
        states.par_iter_mut().enumerate().for_each(|(s, avail)| {
            let mut rng = stream_rng(config.seed, (t * n_samples + s) as u64, CALIBRATE_ADVANCE);
            let v = arrivals.sample(&mut rng);
            let (plan, _) = attenuated_round(topo, config.alpha, config.beta, sols, vkeep, ekeep, v, |u| avail[u], &mut rng);
            for f in plan {
                if rng.random::<f64>() < topo.accept_prob[f] {
                    avail[topo.edge_driver[f]] = false;
                    break;
                }
            }
        });
    }
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct AttenAlg {
    pub alpha: f64,
    pub beta: f64,
    pub x: ScaledSolution,
    pub y: ScaledSolution,
    pub schedule: Schedule,
    pub table: AttenuationTable,
}

impl AttenAlg {
    pub fn new(
        topo: &Topology,
        config: &PolicyConfig,
        x: ScaledSolution,
        y: ScaledSolution,
        schedule: Schedule,
        table: AttenuationTable,
    ) -> Result<Self> {
        config.validate()?;
        check_scaled(topo, "scaled_x", &x)?;
        check_scaled(topo, "scaled_y", &y)?;
        table.check(topo)?;
        Ok(AttenAlg {
            alpha: config.alpha,
            beta: config.beta,
            x,
            y,
            schedule,
            table,
        })
    }

    /// One AttenAlg round; the blocked drivers are returned for logging.
    pub fn step(&self, topo: &Topology, rider: usize, t: usize, state: &FleetState, rng: &mut PolicyRng) -> (ProbePlan, Vec<usize>) {
        let (plan, blocked) = attenuated_round(
            topo,
            self.alpha,
            self.beta,
            [&self.x, &self.y],
            &self.table.vertex_keep[t],
            [&self.table.edge_keep[0][t], &self.table.edge_keep[1][t]],
            rider,
            |u| state.is_available(u),
            rng,
        );
        (ProbePlan::from_edges(plan), blocked)
    }
}

impl Policy for AttenAlg {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Attenalg
    }

    fn decide(&self, topo: &Topology, rider: usize, t: usize, state: &FleetState, rng: &mut PolicyRng) -> Decision {
        let (plan, blocked) = self.step(topo, rider, t, state, rng);
        Decision { plan, blocked }
    }
}
