//! Exact expectations for tiny instances by full enumeration of arrivals,
//! policy plans and acceptance coins. States are memoized on
//! `(round, remaining capacities)`.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::instance::Topology;
use crate::policies::{FleetState, Policy, PolicyKind};

pub const EXACT_MAX_HORIZON: u32 = 6;
pub const EXACT_MAX_RIDERS: usize = 3;
pub const EXACT_MAX_EDGES_PER_RIDER: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactResult {
    pub profit: f64,
    /// Expected matched count per driver.
    pub matched: Vec<f64>,
}

type Memo = HashMap<(usize, Vec<u32>), (f64, Vec<f64>)>;

struct Walker<'a> {
    topo: &'a Topology,
    policy: &'a dyn Policy,
    q: Vec<f64>,
    memo: Memo,
}

impl Walker<'_> {
    fn value(&mut self, t: usize, remaining: Vec<u32>) -> Result<(f64, Vec<f64>)> {
        let nu = self.topo.num_drivers();
        if t == self.topo.horizon as usize {
            return Ok((0.0, vec![0.0; nu]));
        }
        if let Some(hit) = self.memo.get(&(t, remaining.clone())) {
            return Ok(hit.clone());
        }
        let state = FleetState {
            matched: self.topo.capacity.iter().zip(&remaining).map(|(c, r)| c - r).collect(),
            remaining: remaining.clone(),
        };
        let mut profit = 0.0;
        let mut matched = vec![0.0; nu];
        for v in 0..self.topo.num_riders() {
            let qv = self.q[v];
            if qv == 0.0 {
                continue;
            }
            for (plan, pp) in self.policy.plan_distribution(self.topo, v, t, &state)? {
                let mut reach = qv * pp;
                for &f in plan.edges() {
                    let u = self.topo.edge_driver[f];
                    if remaining[u] == 0 || reach == 0.0 {
                        continue;
                    }
                    let p = self.topo.accept_prob[f];
                    let w = reach * p;
                    if w > 0.0 {
                        let mut next = remaining.clone();
                        next[u] -= 1;
                        let (fp, fm) = self.value(t + 1, next)?;
                        profit += w * (self.topo.weight[f] + fp);
                        matched[u] += w;
                        for (a, b) in matched.iter_mut().zip(&fm) {
                            *a += w * b;
                        }
                    }
                    reach *= 1.0 - p;
                }
                if reach > 0.0 {
                    let (fp, fm) = self.value(t + 1, remaining.clone())?;
                    profit += reach * fp;
                    for (a, b) in matched.iter_mut().zip(&fm) {
                        *a += reach * b;
                    }
                }
            }
        }
        self.memo.insert((t, remaining), (profit, matched.clone()));
        Ok((profit, matched))
    }
}

/// Exact expected profit and per-driver matched counts of `policy`, which
/// must be WarmUp or a greedy baseline.
pub fn exact_eval(topo: &Topology, policy: &dyn Policy) -> Result<ExactResult> {
    if policy.kind() == PolicyKind::Attenalg {
        return Err(Error::EnumerationBounds("attenalg is not supported".into()));
    }
    if topo.horizon > EXACT_MAX_HORIZON {
        return Err(Error::EnumerationBounds(format!("horizon {} > {EXACT_MAX_HORIZON}", topo.horizon)));
    }
    if topo.num_riders() > EXACT_MAX_RIDERS {
        return Err(Error::EnumerationBounds(format!("{} rider types > {EXACT_MAX_RIDERS}", topo.num_riders())));
    }
    if let Some(es) = topo.rider_edges.iter().find(|e| e.len() > EXACT_MAX_EDGES_PER_RIDER) {
        return Err(Error::EnumerationBounds(format!(
            "a rider with {} edges > {EXACT_MAX_EDGES_PER_RIDER}",
            es.len()
        )));
    }
    let total: f64 = topo.arrival_rate.iter().sum();
    let mut walker = Walker {
        topo,
        policy,
        q: topo.arrival_rate.iter().map(|r| r / total).collect(),
        memo: HashMap::new(),
    };
    let (profit, matched) = walker.value(0, topo.capacity.clone())?;
    Ok(ExactResult { profit, matched })
}
