//! Greedy baselines. Greedy-P probes by largest `w_f·p_f`; Greedy-F probes
//! the driver with the lowest current matched-count/capacity first. Ties go
//! to the lexicographically smaller edge id.

use std::cmp::Ordering;

use super::{Decision, FleetState, Policy, PolicyKind, PolicyRng, ProbePlan};
use crate::error::{invalid, Result};
use crate::instance::Topology;

#[derive(Debug, Clone)]
pub struct Greedy {
    kind: PolicyKind,
    /// Position of each edge in id order.
    id_rank: Vec<usize>,
}

impl Greedy {
    pub fn new(topo: &Topology, kind: PolicyKind) -> Result<Self> {
        if !kind.is_greedy() {
            return Err(invalid("kind", "expected greedy_p or greedy_f"));
        }
        let mut by_id: Vec<usize> = (0..topo.num_edges()).collect();
        by_id.sort_by(|&a, &b| topo.edge_ids[a].cmp(&topo.edge_ids[b]));
        let mut id_rank = vec![0; by_id.len()];
        for (rank, f) in by_id.into_iter().enumerate() {
            id_rank[f] = rank;
        }
        Ok(Greedy { kind, id_rank })
    }
}

pub fn greedy_step(policy: &Greedy, topo: &Topology, rider: usize, state: &FleetState) -> ProbePlan {
    let mut cand: Vec<usize> = topo.rider_edges[rider]
        .iter()
        .copied()
        .filter(|&f| state.is_available(topo.edge_driver[f]))
        .collect();
    let by_id = |a: &usize, b: &usize| policy.id_rank[*a].cmp(&policy.id_rank[*b]);
    match policy.kind {
        PolicyKind::GreedyP => {
            let score = |f: usize| topo.weight[f] * topo.accept_prob[f];
            cand.sort_by(|a, b| score(*b).partial_cmp(&score(*a)).unwrap_or(Ordering::Equal).then(by_id(a, b)));
        }
        _ => {
            let rate = |f: usize| {
                let u = topo.edge_driver[f];
                f64::from(state.matched[u]) / f64::from(topo.capacity[u])
            };
            cand.sort_by(|a, b| rate(*a).partial_cmp(&rate(*b)).unwrap_or(Ordering::Equal).then(by_id(a, b)));
        }
    }
    cand.truncate(topo.patience[rider] as usize);
    ProbePlan::from_edges(cand)
}

impl Policy for Greedy {
    fn kind(&self) -> PolicyKind {
        self.kind
    }

    fn decide(&self, topo: &Topology, rider: usize, _t: usize, state: &FleetState, _rng: &mut PolicyRng) -> Decision {
        greedy_step(self, topo, rider, state).into()
    }

    fn plan_distribution(
        &self,
        topo: &Topology,
        rider: usize,
        _t: usize,
        state: &FleetState,
    ) -> Result<Vec<(ProbePlan, f64)>> {
        Ok(vec![(greedy_step(self, topo, rider, state), 1.0)])
    }
}
