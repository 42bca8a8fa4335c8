//! Matching instances: driver types, rider types, compatibility edges and the
//! horizon over which riders arrive.
//!
//! An [`Instance`] is plain data and serializes to a single JSON document.
//! Algorithms that need adjacency work on a [`Topology`], an index view built
//! once from a validated instance.

mod generate;
mod ingest;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{gen_hardness, gen_synthetic, AcceptProbs, GeneratorParams, Group};
pub use ingest::{ingest_trip_records, IngestOptions, IngestReport};

/// Absolute tolerance on `Σ r_v = T`.
pub const RATE_SUM_TOL: f64 = 1e-9;

pub type Attributes = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriverType {
    pub id: String,
    /// Number of drivers of this type, `B_u`.
    pub capacity: u32,
    #[serde(default)]
    pub attributes: Attributes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiderType {
    pub id: String,
    /// Expected arrivals over the whole horizon, `r_v`.
    pub arrival_rate: f64,
    /// Maximum number of probes per arrival, `Δ_v`.
    pub patience: u32,
    #[serde(default)]
    pub attributes: Attributes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: String,
    pub driver: String,
    pub rider: String,
    pub accept_prob: f64,
    /// Platform profit collected when this edge is matched.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub drivers: Vec<DriverType>,
    pub riders: Vec<RiderType>,
    pub edges: Vec<Edge>,
    pub horizon: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    CapacityPositive,
    PatiencePositive,
    RateNonnegative,
    AcceptProbRange,
    WeightNonnegative,
    UnknownDriver,
    UnknownRider,
    DuplicateId,
    HorizonPositive,
    RateSum,
}

impl Rule {
    pub fn as_str(self) -> &'static str {
        match self {
            Rule::CapacityPositive => "capacity >= 1",
            Rule::PatiencePositive => "patience >= 1",
            Rule::RateNonnegative => "arrival_rate >= 0",
            Rule::AcceptProbRange => "accept_prob in (0,1]",
            Rule::WeightNonnegative => "weight >= 0",
            Rule::UnknownDriver => "edge driver exists",
            Rule::UnknownRider => "edge rider exists",
            Rule::DuplicateId => "ids unique",
            Rule::HorizonPositive => "horizon >= 1",
            Rule::RateSum => "sum of arrival_rate equals horizon",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub rule: Rule,
    /// Offending id; empty for instance-wide rules.
    pub id: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule, id: &str) -> bool {
        self.violations.iter().any(|v| v.rule == rule && v.id == id)
    }

    fn push(&mut self, rule: Rule, id: impl Into<String>) {
        self.violations.push(Violation {
            rule,
            id: id.into(),
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            if v.id.is_empty() {
                write!(f, "{}", v.rule)?;
            } else {
                write!(f, "{}: {}", v.id, v.rule)?;
            }
        }
        Ok(())
    }
}

impl Instance {
    pub fn validate(&self) -> ValidationReport {
        let mut report = ValidationReport::default();
        if self.horizon < 1 {
            report.push(Rule::HorizonPositive, "");
        }

        let mut seen = HashSet::new();
        for d in &self.drivers {
            if !seen.insert(d.id.as_str()) {
                report.push(Rule::DuplicateId, &d.id);
            }
            if d.capacity < 1 {
                report.push(Rule::CapacityPositive, &d.id);
            }
        }
        let driver_ids = seen;

        let mut rider_ids = HashSet::new();
        for r in &self.riders {
            if !rider_ids.insert(r.id.as_str()) {
                report.push(Rule::DuplicateId, &r.id);
            }
            if r.patience < 1 {
                report.push(Rule::PatiencePositive, &r.id);
            }
            if !(r.arrival_rate >= 0.0 && r.arrival_rate.is_finite()) {
                report.push(Rule::RateNonnegative, &r.id);
            }
        }

        let mut edge_ids = HashSet::new();
        for e in &self.edges {
            if !edge_ids.insert(e.id.as_str()) {
                report.push(Rule::DuplicateId, &e.id);
            }
            if !(e.accept_prob > 0.0 && e.accept_prob <= 1.0) {
                report.push(Rule::AcceptProbRange, &e.id);
            }
            if !(e.weight >= 0.0 && e.weight.is_finite()) {
                report.push(Rule::WeightNonnegative, &e.id);
            }
            if !driver_ids.contains(e.driver.as_str()) {
                report.push(Rule::UnknownDriver, &e.id);
            }
            if !rider_ids.contains(e.rider.as_str()) {
                report.push(Rule::UnknownRider, &e.id);
            }
        }

        let total: f64 = self.riders.iter().map(|r| r.arrival_rate).sum();
        if (total - f64::from(self.horizon)).abs() > RATE_SUM_TOL {
            report.push(Rule::RateSum, "");
        }
        report
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let report = self.validate();
        if report.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInstance(report))
        }
    }

    /// Builds the adjacency index. Fails on an invalid instance.
    pub fn topology(&self) -> Result<Topology> {
        self.ensure_valid()?;
        Ok(Topology::build(self))
    }

    pub fn is_unit_capacity(&self) -> bool {
        self.drivers.iter().all(|d| d.capacity == 1)
    }

    /// Replaces every driver type `u` by `B_u` unit-capacity copies and every
    /// edge by one copy per copy of its driver.
    ///
    /// The returned map sends each new driver id to the original driver id.
    pub fn to_unit_capacity(&self) -> Result<(Instance, BTreeMap<String, String>)> {
        self.ensure_valid()?;
        let mut origin = BTreeMap::new();
        let mut copies: HashMap<&str, Vec<String>> = HashMap::new();
        let mut drivers = Vec::new();
        for d in &self.drivers {
            let ids: Vec<String> = (0..d.capacity).map(|k| format!("{}#{}", d.id, k)).collect();
            for id in &ids {
                origin.insert(id.clone(), d.id.clone());
                drivers.push(DriverType {
                    id: id.clone(),
                    capacity: 1,
                    attributes: d.attributes.clone(),
                });
            }
            copies.insert(d.id.as_str(), ids);
        }
        let mut edges = Vec::new();
        for e in &self.edges {
            for (k, copy) in copies[e.driver.as_str()].iter().enumerate() {
                edges.push(Edge {
                    id: format!("{}#{}", e.id, k),
                    driver: copy.clone(),
                    rider: e.rider.clone(),
                    accept_prob: e.accept_prob,
                    weight: e.weight,
                });
            }
        }
        let expanded = Instance {
            drivers,
            riders: self.riders.clone(),
            edges,
            horizon: self.horizon,
        };
        Ok((expanded, origin))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Instance> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Instance> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Instance::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn max_capacity(&self) -> u32 {
        self.drivers.iter().map(|d| d.capacity).max().unwrap_or(0)
    }
}

/// Index view of a validated instance. Drivers, riders and edges are referred
/// to by their position in the instance's lists.
#[derive(Debug, Clone)]
pub struct Topology {
    pub edge_driver: Vec<usize>,
    pub edge_rider: Vec<usize>,
    pub rider_edges: Vec<Vec<usize>>,
    pub driver_edges: Vec<Vec<usize>>,
    pub accept_prob: Vec<f64>,
    pub weight: Vec<f64>,
    pub edge_ids: Vec<String>,
    pub driver_ids: Vec<String>,
    pub rider_ids: Vec<String>,
    pub capacity: Vec<u32>,
    pub patience: Vec<u32>,
    pub arrival_rate: Vec<f64>,
    pub horizon: u32,
}

impl Topology {
    fn build(instance: &Instance) -> Topology {
        let driver_pos: HashMap<&str, usize> = instance
            .drivers
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.as_str(), i))
            .collect();
        let rider_pos: HashMap<&str, usize> = instance
            .riders
            .iter()
            .enumerate()
            .map(|(i, r)| (r.id.as_str(), i))
            .collect();
        let mut topo = Topology {
            edge_driver: Vec::with_capacity(instance.edges.len()),
            edge_rider: Vec::with_capacity(instance.edges.len()),
            rider_edges: vec![Vec::new(); instance.riders.len()],
            driver_edges: vec![Vec::new(); instance.drivers.len()],
            accept_prob: instance.edges.iter().map(|e| e.accept_prob).collect(),
            weight: instance.edges.iter().map(|e| e.weight).collect(),
            edge_ids: instance.edges.iter().map(|e| e.id.clone()).collect(),
            driver_ids: instance.drivers.iter().map(|d| d.id.clone()).collect(),
            rider_ids: instance.riders.iter().map(|r| r.id.clone()).collect(),
            capacity: instance.drivers.iter().map(|d| d.capacity).collect(),
            patience: instance.riders.iter().map(|r| r.patience).collect(),
            arrival_rate: instance.riders.iter().map(|r| r.arrival_rate).collect(),
            horizon: instance.horizon,
        };
        for (k, e) in instance.edges.iter().enumerate() {
            let u = driver_pos[e.driver.as_str()];
            let v = rider_pos[e.rider.as_str()];
            topo.edge_driver.push(u);
            topo.edge_rider.push(v);
            topo.rider_edges[v].push(k);
            topo.driver_edges[u].push(k);
        }
        topo
    }

    pub fn num_drivers(&self) -> usize {
        self.driver_edges.len()
    }

    pub fn num_riders(&self) -> usize {
        self.rider_edges.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_driver.len()
    }

    pub fn is_unit_capacity(&self) -> bool {
        self.capacity.iter().all(|&c| c == 1)
    }
}
