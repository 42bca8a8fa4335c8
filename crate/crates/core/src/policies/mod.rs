//! Online policies: the SR probing subroutine, WarmUp, AttenAlg and the two
//! greedy baselines.
//!
//! Every policy implements [`Policy`]. The simulator owns the per-trial
//! [`FleetState`] and hands it in read-only each round; a policy answers with
//! a [`Decision`] whose plan the simulator executes probe by probe.

mod attenuation;
mod greedy;
mod sr;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::instance::Topology;
use crate::lp::ScaledSolution;

pub use attenuation::{calibrate_attenuation, AttenAlg, AttenuationTable};
pub use greedy::{greedy_step, Greedy};
pub use sr::{sr_distribution, sr_probe};

pub type PolicyRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Warmup,
    Attenalg,
    GreedyP,
    GreedyF,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Warmup => "warmup",
            PolicyKind::Attenalg => "attenalg",
            PolicyKind::GreedyP => "greedy_p",
            PolicyKind::GreedyF => "greedy_f",
        }
    }

    pub fn is_greedy(self) -> bool {
        matches!(self, PolicyKind::GreedyP | PolicyKind::GreedyF)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "warmup" => Ok(PolicyKind::Warmup),
            "attenalg" => Ok(PolicyKind::Attenalg),
            "greedy_p" => Ok(PolicyKind::GreedyP),
            "greedy_f" => Ok(PolicyKind::GreedyF),
            _ => Err(invalid("kind", format!("unknown policy `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    /// Simulated prefixes per calibration round (AttenAlg only).
    #[serde(default = "default_samples")]
    pub attenuation_samples: u32,
    #[serde(default)]
    pub seed: u64,
}

fn default_samples() -> u32 {
    10_000
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind, alpha: f64, beta: f64) -> Self {
        PolicyConfig {
            kind,
            alpha,
            beta,
            attenuation_samples: default_samples(),
            seed: 0,
        }
    }

    pub fn greedy_p() -> Self {
        Self::new(PolicyKind::GreedyP, 0.0, 0.0)
    }

    pub fn greedy_f() -> Self {
        Self::new(PolicyKind::GreedyF, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.attenuation_samples == 0 {
            return Err(invalid("attenuation_samples", "must be at least 1"));
        }
        if self.kind.is_greedy() {
            return Ok(());
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("{v} is not a finite nonnegative number")));
            }
        }
        if self.alpha + self.beta > 1.0 + 1e-12 {
            return Err(invalid("beta", format!("alpha + beta = {} exceeds 1", self.alpha + self.beta)));
        }
        Ok(())
    }
}

/// Attenuation targets: `γ_t` for availability and `μ_t` for probes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub gamma: Vec<f64>,
    pub mu: Vec<f64>,
}

impl Schedule {
    pub fn horizon(&self) -> usize {
        self.gamma.len()
    }

    /// `(1/T) Σ_t μ_t γ_t`, which tends to `(e−1)/(e+1)`.
    pub fn mean_target(&self) -> f64 {
        let s: f64 = self.gamma.iter().zip(&self.mu).map(|(g, m)| g * m).sum();
        s / self.horizon() as f64
    }
}

/// `γ₁ = 1`, `μ_t = 1 − γ_t/2`, `γ_{t+1} = γ_t(1 − μ_t/T)`.
pub fn make_schedule(horizon: u32) -> Result<Schedule> {
    if horizon == 0 {
        return Err(invalid("horizon", "must be at least 1"));
    }
    let n = horizon as usize;
    let t = f64::from(horizon);
    let mut gamma = Vec::with_capacity(n);
    let mut mu = Vec::with_capacity(n);
    let mut g = 1.0;
    for _ in 0..n {
        let m = 1.0 - g / 2.0;
        gamma.push(g);
        mu.push(m);
        g *= 1.0 - m / t;
    }
    Ok(Schedule { gamma, mu })
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProbePlan {
    Reject,
    Probe(Vec<usize>),
}

impl ProbePlan {
    /// Empty plans collapse to a rejection.
    pub fn from_edges(edges: Vec<usize>) -> Self {
        if edges.is_empty() {
            ProbePlan::Reject
        } else {
            ProbePlan::Probe(edges)
        }
    }

    pub fn edges(&self) -> &[usize] {
        match self {
            ProbePlan::Reject => &[],
            ProbePlan::Probe(e) => e,
        }
    }

    pub fn is_reject(&self) -> bool {
        self.edges().is_empty()
    }
}

/// Per-trial driver state, owned by the simulator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FleetState {
    pub remaining: Vec<u32>,
    pub matched: Vec<u32>,
}

impl FleetState {
    pub fn new(topo: &Topology) -> Self {
        FleetState {
            remaining: topo.capacity.clone(),
            matched: vec![0; topo.num_drivers()],
        }
    }

    pub fn is_available(&self, driver: usize) -> bool {
        self.remaining[driver] > 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decision {
    pub plan: ProbePlan,
    /// Drivers withheld for this round by vertex attenuation.
    pub blocked: Vec<usize>,
}

impl From<ProbePlan> for Decision {
    fn from(plan: ProbePlan) -> Self {
        Decision {
            plan,
            blocked: Vec::new(),
        }
    }
}

pub trait Policy: Sync {
    fn kind(&self) -> PolicyKind;

    /// Plan for `rider` arriving in round `t` (zero-based).
    fn decide(&self, topo: &Topology, rider: usize, t: usize, state: &FleetState, rng: &mut PolicyRng) -> Decision;

    /// Exact distribution of [`Policy::decide`]'s plan. Plans are merged and
    /// probabilities sum to one.
    fn plan_distribution(
        &self,
        _topo: &Topology,
        _rider: usize,
        _t: usize,
        _state: &FleetState,
    ) -> Result<Vec<(ProbePlan, f64)>> {
        Err(Error::EnumerationBounds(format!(
            "{} has no exact plan distribution",
            self.kind()
        )))
    }
}

/// Which LP solution a round follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Branch {
    Profit,
    Fairness,
}

pub(crate) fn pick_branch(alpha: f64, beta: f64, rng: &mut PolicyRng) -> Option<Branch> {
    let u: f64 = rng.random();
    if u < alpha {
        Some(Branch::Profit)
    } else if u < alpha + beta {
        Some(Branch::Fairness)
    } else {
        None
    }
}

pub(crate) fn check_scaled(topo: &Topology, name: &'static str, s: &ScaledSolution) -> Result<()> {
    let mismatch = || invalid(name, "scaled solution does not match the instance topology");
    if s.rider_edges.len() != topo.num_riders() || s.values.len() != topo.num_riders() {
        return Err(mismatch());
    }
    for (v, vals) in s.values.iter().enumerate() {
        // Riders that never arrive may carry an empty entry.
        let idle = topo.arrival_rate[v] <= 0.0 && s.rider_edges[v].is_empty();
        if !idle && s.rider_edges[v] != topo.rider_edges[v] {
            return Err(mismatch());
        }
        if vals.len() != s.rider_edges[v].len() {
            return Err(invalid(name, "scaled solution does not match the instance topology"));
        }
        if vals.iter().any(|z| !(0.0..=1.0).contains(z)) {
            return Err(invalid(name, "scaled values must lie in [0,1]"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct WarmUp {
    pub alpha: f64,
    pub beta: f64,
    pub x: ScaledSolution,
    pub y: ScaledSolution,
}

impl WarmUp {
    pub fn new(topo: &Topology, config: &PolicyConfig, x: ScaledSolution, y: ScaledSolution) -> Result<Self> {
        config.validate()?;
        if config.kind != PolicyKind::Warmup {
            return Err(invalid("kind", "expected warmup"));
        }
        check_scaled(topo, "scaled_x", &x)?;
        check_scaled(topo, "scaled_y", &y)?;
        Ok(WarmUp {
            alpha: config.alpha,
            beta: config.beta,
            x,
            y,
        })
    }

    fn solution(&self, branch: Branch) -> &ScaledSolution {
        match branch {
            Branch::Profit => &self.x,
            Branch::Fairness => &self.y,
        }
    }
}

/// One WarmUp round: SR on `x^v` with probability α, on `y^v` with
/// probability β, rejection otherwise.
pub fn warmup_step(policy: &WarmUp, topo: &Topology, rider: usize, state: &FleetState, rng: &mut PolicyRng) -> ProbePlan {
    match pick_branch(policy.alpha, policy.beta, rng) {
        None => ProbePlan::Reject,
        Some(b) => {
            let (edges, z) = policy.solution(b).rider(rider);
            ProbePlan::from_edges(sr::sr_plan(topo, rider, edges, z, |u| state.is_available(u), rng))
        }
    }
}

impl Policy for WarmUp {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Warmup
    }

    fn decide(&self, topo: &Topology, rider: usize, _t: usize, state: &FleetState, rng: &mut PolicyRng) -> Decision {
        warmup_step(self, topo, rider, state, rng).into()
    }

    fn plan_distribution(
        &self,
        topo: &Topology,
        rider: usize,
        _t: usize,
        state: &FleetState,
    ) -> Result<Vec<(ProbePlan, f64)>> {
        let mut out = std::collections::BTreeMap::new();
        for (b, w) in [(Branch::Profit, self.alpha), (Branch::Fairness, self.beta)] {
            if w <= 0.0 {
                continue;
            }
            let (edges, z) = self.solution(b).rider(rider);
            for (plan, p) in sr_distribution(topo, rider, edges, z, |u| state.is_available(u))? {
                *out.entry(ProbePlan::from_edges(plan)).or_insert(0.0) += w * p;
            }
        }
        let rest = 1.0 - self.alpha - self.beta;
        if rest > 0.0 {
            *out.entry(ProbePlan::Reject).or_insert(0.0) += rest;
        }
        Ok(out.into_iter().collect())
    }
}

/// Builds the policy described by `config`. AttenAlg is calibrated here,
/// which requires a unit-capacity topology.
pub fn build_policy(
    topo: &Topology,
    config: &PolicyConfig,
    x: &ScaledSolution,
    y: &ScaledSolution,
) -> Result<Box<dyn Policy>> {
    config.validate()?;
    Ok(match config.kind {
        PolicyKind::Warmup => Box::new(WarmUp::new(topo, config, x.clone(), y.clone())?),
        PolicyKind::Attenalg => {
            let schedule = make_schedule(topo.horizon)?;
            let table = calibrate_attenuation(topo, x, y, config, &schedule)?;
            Box::new(AttenAlg::new(topo, config, x.clone(), y.clone(), schedule, table)?)
        }
        PolicyKind::GreedyP | PolicyKind::GreedyF => Box::new(Greedy::new(topo, config.kind)?),
    })
}

#[cfg(test)]
mod tests;
