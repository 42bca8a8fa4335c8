//! Dependent rounding followed by probing in a uniformly random order.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{FleetState, PolicyRng, ProbePlan};
use crate::error::{Error, Result};
use crate::instance::Topology;
use crate::rounding::{outcome_distribution, round_values, FractionalVector};

/// Pulls a vector whose sum exceeds the patience (LP round-off) back onto it,
/// so rounding can never select more than `Δ_v` edges.
fn capped(z: &[f64], patience: u32) -> Vec<f64> {
    let sum: f64 = z.iter().sum();
    let cap = f64::from(patience);
    if sum > cap {
        z.iter().map(|v| v * cap / sum).collect()
    } else {
        z.to_vec()
    }
}

/// Core of SR. `edges` and `z` are aligned; `available` is checked against
/// each edge's driver when the plan is built.
pub(crate) fn sr_plan(
    topo: &Topology,
    rider: usize,
    edges: &[usize],
    z: &[f64],
    available: impl Fn(usize) -> bool,
    rng: &mut PolicyRng,
) -> Vec<usize> {
    if edges.is_empty() {
        return Vec::new();
    }
    let patience = topo.patience[rider];
    let picked = round_values(&capped(z, patience), rng).expect("scaled values validated in [0,1]");
    let mut order: Vec<usize> = (0..edges.len()).collect();
    order.shuffle(rng);
    order
        .into_iter()
        .filter(|&k| picked[k] && available(topo.edge_driver[edges[k]]))
        .map(|k| edges[k])
        .take(patience as usize)
        .collect()
}

/// SR for one arriving rider. `z.ids` are edge indices and must all be
/// incident to `rider`; edges of the rider missing from `z` get zero mass.
pub fn sr_probe(
    topo: &Topology,
    rider: usize,
    z: &FractionalVector,
    state: &FleetState,
    rng: &mut PolicyRng,
) -> Result<ProbePlan> {
    let edges = &topo.rider_edges[rider];
    let mut dense = vec![0.0; edges.len()];
    for (&f, &v) in z.ids.iter().zip(&z.values) {
        match edges.iter().position(|&e| e == f) {
            Some(k) => dense[k] = v,
            None => {
                return Err(Error::ForeignEdge {
                    edge: topo.edge_ids.get(f).cloned().unwrap_or_else(|| f.to_string()),
                    rider: topo.rider_ids[rider].clone(),
                })
            }
        }
    }
    let sum: f64 = dense.iter().sum();
    if sum > f64::from(topo.patience[rider]) + 1e-9 {
        return Err(crate::error::invalid("z", format!("sum {sum} exceeds the rider's patience")));
    }
    Ok(ProbePlan::from_edges(sr_plan(topo, rider, edges, &dense, |u| state.is_available(u), rng)))
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Exact distribution of the plans [`sr_plan`] produces, over rounding
/// outcomes and all `|E_v|!` orders.
pub fn sr_distribution(
    topo: &Topology,
    rider: usize,
    edges: &[usize],
    z: &[f64],
    available: impl Fn(usize) -> bool,
) -> Result<Vec<(Vec<usize>, f64)>> {
    if edges.len() > 8 {
        return Err(Error::EnumerationBounds(format!("{} edges at one rider", edges.len())));
    }
    if edges.is_empty() {
        return Ok(vec![(Vec::new(), 1.0)]);
    }
    let patience = topo.patience[rider];
    let perms = permutations(edges.len());
    let share = 1.0 / perms.len() as f64;
    let mut out = BTreeMap::new();
    for (picked, p) in outcome_distribution(&capped(z, patience))? {
        for order in &perms {
            let plan: Vec<usize> = order
                .iter()
                .filter(|&&k| picked[k] && available(topo.edge_driver[edges[k]]))
                .map(|&k| edges[k])
                .take(patience as usize)
                .collect();
            *out.entry(plan).or_insert(0.0) += p * share;
        }
    }
    Ok(out.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(3).len(), 6);
        let mut all = permutations(3);
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 6);
    }
}
