//! Benchmark linear programs for profit and max-min fairness, the solver
//! behind them, and per-arrival scaling of their solutions.
//!
//! Both programs share the probing constraints: for every driver
//! `Σ_{f∈E_u} x_f p_f ≤ B_u`, for every rider `Σ_{f∈E_v} x_f ≤ Δ_v r_v` and
//! `Σ_{f∈E_v} x_f p_f ≤ r_v`, and `0 ≤ x_f ≤ r_v` per edge. The fairness
//! program adds one auxiliary variable bounded by every driver's normalized
//! expected match count and maximizes it.

mod simplex;
mod text;

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::instance::{Instance, Topology};

pub use simplex::{solve, FEAS_TOL, OPT_TOL};
pub use text::parse_lp_text;

/// Label of the fairness program's auxiliary variable.
pub const FAIRNESS_VAR: &str = "eta_aux";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: String,
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Amount by which `x` violates the constraint (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A maximization problem over bounded variables.
#[derive(Debug, Clone, PartialEq)]
pub struct LpModel {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
    pub labels: Vec<String>,
}

impl LpModel {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn check_dimensions(&self) -> Result<()> {
        let n = self.num_vars();
        if self.bounds.len() != n || self.labels.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "{n} objective coefficients, {} bounds, {} labels",
                self.bounds.len(),
                self.labels.len()
            )));
        }
        if let Some(c) = self.constraints.iter().find(|c| c.coeffs.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "constraint `{}` has {} coefficients, expected {n}",
                c.name,
                c.coeffs.len()
            )));
        }
        Ok(())
    }

    pub fn to_lp_text(&self) -> String {
        text::write_lp_text(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub labels: Vec<String>,
    pub values: Vec<f64>,
    pub objective_value: f64,
    pub status: Status,
}

impl LpSolution {
    fn without_values(model: &LpModel, status: Status) -> LpSolution {
        LpSolution {
            labels: model.labels.clone(),
            values: Vec::new(),
            objective_value: f64::NAN,
            status,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    pub fn get(&self, label: &str) -> Option<f64> {
        let k = self.labels.iter().position(|l| l == label)?;
        self.values.get(k).copied()
    }

    /// Edge id (or auxiliary label) to value.
    pub fn value_map(&self) -> BTreeMap<String, f64> {
        self.labels
            .iter()
            .cloned()
            .zip(self.values.iter().copied())
            .collect()
    }

    pub fn require_optimal(self) -> Result<LpSolution> {
        if self.is_optimal() {
            Ok(self)
        } else {
            Err(Error::NotOptimal(self.status))
        }
    }
}

fn base_model(instance: &Instance, topo: &Topology, extra_vars: usize) -> LpModel {
    let ne = instance.edges.len();
    let n = ne + extra_vars;
    let mut constraints = Vec::new();
    for (u, driver) in instance.drivers.iter().enumerate() {
        let mut coeffs = vec![0.0; n];
        for &f in &topo.driver_edges[u] {
            coeffs[f] = instance.edges[f].accept_prob;
        }
        constraints.push(Constraint {
            name: format!("capacity_{}", driver.id),
            coeffs,
            relation: Relation::Le,
            rhs: f64::from(driver.capacity),
        });
    }
    for (v, rider) in instance.riders.iter().enumerate() {
        let mut probes = vec![0.0; n];
        let mut matches = vec![0.0; n];
        for &f in &topo.rider_edges[v] {
            probes[f] = 1.0;
            matches[f] = instance.edges[f].accept_prob;
        }
        constraints.push(Constraint {
            name: format!("patience_{}", rider.id),
            coeffs: probes,
            relation: Relation::Le,
            rhs: f64::from(rider.patience) * rider.arrival_rate,
        });
        constraints.push(Constraint {
            name: format!("arrival_{}", rider.id),
            coeffs: matches,
            relation: Relation::Le,
            rhs: rider.arrival_rate,
        });
    }
    let bounds = topo
        .edge_rider
        .iter()
        .map(|&v| (0.0, instance.riders[v].arrival_rate))
        .collect();
    LpModel {
        objective: vec![0.0; n],
        constraints,
        bounds,
        labels: instance.edges.iter().map(|e| e.id.clone()).collect(),
    }
}

/// The profit program: maximize `Σ_f w_f p_f x_f`.
pub fn build_profit_lp(instance: &Instance) -> Result<LpModel> {
    let topo = instance.topology()?;
    let mut model = base_model(instance, &topo, 0);
    model.objective = instance
        .edges
        .iter()
        .map(|e| e.weight * e.accept_prob)
        .collect();
    Ok(model)
}

/// The linearized max-min fairness program: maximize an auxiliary variable
/// bounded above by `Σ_{f∈E_u} x_f p_f / B_u` for every driver.
pub fn build_fairness_lp(instance: &Instance) -> Result<LpModel> {
    let topo = instance.topology()?;
    let ne = instance.edges.len();
    let mut model = base_model(instance, &topo, 1);
    model.objective[ne] = 1.0;
    for (u, driver) in instance.drivers.iter().enumerate() {
        let mut coeffs = vec![0.0; ne + 1];
        for &f in &topo.driver_edges[u] {
            coeffs[f] = -instance.edges[f].accept_prob / f64::from(driver.capacity);
        }
        coeffs[ne] = 1.0;
        model.constraints.push(Constraint {
            name: format!("fairness_{}", driver.id),
            coeffs,
            relation: Relation::Le,
            rhs: 0.0,
        });
    }
    // The capacity rows already cap every normalized match count at 1.
    model.bounds.push((0.0, 1.0));
    model.labels.push(FAIRNESS_VAR.to_string());
    Ok(model)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityViolation {
    pub name: String,
    pub amount: f64,
}

/// Every constraint or bound of `model` that `solution` violates by more
/// than [`FEAS_TOL`].
pub fn check_feasibility(model: &LpModel, solution: &LpSolution) -> Vec<FeasibilityViolation> {
    let mut out = Vec::new();
    let x = &solution.values;
    if x.len() != model.num_vars() {
        out.push(FeasibilityViolation {
            name: "dimension".into(),
            amount: f64::INFINITY,
        });
        return out;
    }
    for c in &model.constraints {
        let amount = c.violation(x);
        if amount > FEAS_TOL {
            out.push(FeasibilityViolation {
                name: c.name.clone(),
                amount,
            });
        }
    }
    for ((&(lo, hi), &v), label) in model.bounds.iter().zip(x).zip(&model.labels) {
        let amount = (lo - v).max(v - hi).max(0.0);
        if amount > FEAS_TOL {
            out.push(FeasibilityViolation {
                name: format!("bound_{label}"),
                amount,
            });
        }
    }
    out
}

/// Per-rider restriction of an LP solution divided by the arrival rate:
/// entry `x*_f / r_v` for each `f ∈ E_v`, clamped to `[0,1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledSolution {
    /// Edge indices per rider, aligned with [`Topology::rider_edges`].
    pub rider_edges: Vec<Vec<usize>>,
    pub values: Vec<Vec<f64>>,
}

impl ScaledSolution {
    pub fn rider(&self, v: usize) -> (&[usize], &[f64]) {
        (&self.rider_edges[v], &self.values[v])
    }

    /// Edge index to scaled value across all riders.
    pub fn by_edge(&self, num_edges: usize) -> Vec<f64> {
        let mut out = vec![0.0; num_edges];
        for (edges, vals) in self.rider_edges.iter().zip(&self.values) {
            for (&f, &z) in edges.iter().zip(vals) {
                out[f] = z;
            }
        }
        out
    }
}

pub fn scale_per_arrival(instance: &Instance, solution: &LpSolution) -> Result<ScaledSolution> {
    let topo = instance.topology()?;
    if !solution.is_optimal() {
        return Err(Error::NotOptimal(solution.status));
    }
    if solution.values.len() < instance.edges.len() {
        return Err(Error::DimensionMismatch(format!(
            "solution has {} values for {} edges",
            solution.values.len(),
            instance.edges.len()
        )));
    }
    let mut values = Vec::with_capacity(topo.num_riders());
    for (v, rider) in instance.riders.iter().enumerate() {
        let edges = &topo.rider_edges[v];
        let r = rider.arrival_rate;
        if r <= 0.0 {
            if edges.iter().any(|&f| solution.values[f] > FEAS_TOL) {
                return Err(Error::MassOnIdleRider {
                    rider: rider.id.clone(),
                });
            }
            values.push(Vec::new());
            continue;
        }
        values.push(
            edges
                .iter()
                .map(|&f| (solution.values[f] / r).clamp(0.0, 1.0))
                .collect(),
        );
    }
    let rider_edges = instance
        .riders
        .iter()
        .enumerate()
        .map(|(v, r)| {
            if r.arrival_rate <= 0.0 {
                Vec::new()
            } else {
                topo.rider_edges[v].clone()
            }
        })
        .collect();
    Ok(ScaledSolution {
        rider_edges,
        values,
    })
}
