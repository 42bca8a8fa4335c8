use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Attributes, DriverType, Edge, Instance, RiderType};
use crate::error::{invalid, Error, Result};

/// Demographic group attached to driver and rider types.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    #[serde(rename = "A")]
    Advantaged,
    #[serde(rename = "D")]
    Disadvantaged,
}

impl Group {
    pub fn label(self) -> &'static str {
        match self {
            Group::Advantaged => "A",
            Group::Disadvantaged => "D",
        }
    }
}

/// Base acceptance probability per (driver group, rider group) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub struct AcceptProbs {
    pub aa: f64,
    pub ad: f64,
    pub da: f64,
    pub dd: f64,
}

impl Default for AcceptProbs {
    fn default() -> Self {
        AcceptProbs {
            aa: 0.6,
            ad: 0.1,
            da: 0.1,
            dd: 0.3,
        }
    }
}

impl AcceptProbs {
    pub fn get(&self, driver: Group, rider: Group) -> f64 {
        use Group::*;
        match (driver, rider) {
            (Advantaged, Advantaged) => self.aa,
            (Advantaged, Disadvantaged) => self.ad,
            (Disadvantaged, Advantaged) => self.da,
            (Disadvantaged, Disadvantaged) => self.dd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorParams {
    pub num_driver_types: usize,
    pub num_rider_types: usize,
    pub capacity_bound: u32,
    pub base_accept_probs: AcceptProbs,
    pub scale_eta: f64,
    pub patience_choices: Vec<u32>,
    pub rate_mean: f64,
    pub rate_stddev: f64,
    pub grid_rows: u32,
    pub grid_cols: u32,
    pub edge_distance_threshold: u32,
    pub seed: u64,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            num_driver_types: 57,
            num_rider_types: 134,
            capacity_bound: 10,
            base_accept_probs: AcceptProbs::default(),
            scale_eta: 0.5,
            patience_choices: vec![1, 2],
            rate_mean: 5.0,
            rate_stddev: 1.0,
            grid_rows: 40,
            grid_cols: 11,
            edge_distance_threshold: 1,
            seed: 0,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_driver_types == 0 {
            return Err(invalid("num_driver_types", "must be positive"));
        }
        if self.num_rider_types == 0 {
            return Err(invalid("num_rider_types", "must be positive"));
        }
        if self.capacity_bound == 0 {
            return Err(invalid("capacity_bound", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.scale_eta) {
            return Err(invalid("scale_eta", format!("{} is outside [0,1]", self.scale_eta)));
        }
        let probs = &self.base_accept_probs;
        for p in [probs.aa, probs.ad, probs.da, probs.dd] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid("base_accept_probs", format!("{p} is outside [0,1]")));
            }
        }
        if self.patience_choices.is_empty() || self.patience_choices.contains(&0) {
            return Err(invalid("patience_choices", "must be a nonempty set of positive integers"));
        }
        if !self.rate_mean.is_finite() {
            return Err(invalid("rate_mean", "must be finite"));
        }
        if !(self.rate_stddev >= 0.0 && self.rate_stddev.is_finite()) {
            return Err(invalid("rate_stddev", "must be finite and nonnegative"));
        }
        if self.grid_rows == 0 || self.grid_cols == 0 {
            return Err(invalid("grid_rows", "grid dimensions must be positive"));
        }
        Ok(())
    }

    /// Acceptance probability after scaling the base value by `η`.
    pub fn accept_prob(&self, driver: Group, rider: Group) -> f64 {
        let base = self.base_accept_probs.get(driver, rider);
        self.scale_eta + (1.0 - self.scale_eta) * base
    }
}

/// The n-unit star family: each unit has one rider with unit rate and
/// patience, and two unit-capacity drivers reached with probability 1 and
/// `eps`. All weights are 1 and the horizon is `n`.
pub fn gen_hardness(n: u32, eps: f64) -> Result<Instance> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("eps", format!("{eps} is outside (0,1)")));
    }
    let mut drivers = Vec::new();
    let mut riders = Vec::new();
    let mut edges = Vec::new();
    for i in 1..=n {
        let v = format!("v{i}");
        riders.push(RiderType {
            id: v.clone(),
            arrival_rate: 1.0,
            patience: 1,
            attributes: Attributes::new(),
        });
        for (side, p) in [("a", 1.0), ("b", eps)] {
            let u = format!("u{i}{side}");
            drivers.push(DriverType {
                id: u.clone(),
                capacity: 1,
                attributes: Attributes::new(),
            });
            edges.push(Edge {
                id: format!("e{i}{side}"),
                driver: u,
                rider: v.clone(),
                accept_prob: p,
                weight: 1.0,
            });
        }
    }
    Ok(Instance {
        drivers,
        riders,
        edges,
        horizon: n,
    })
}

/// Group labels at ratio 1:2 (disadvantaged count rounded down), in a seeded
/// shuffled order.
pub(crate) fn assign_groups(n: usize, rng: &mut ChaCha8Rng) -> Vec<Group> {
    let mut groups = vec![Group::Advantaged; n];
    for g in groups.iter_mut().take(n / 3) {
        *g = Group::Disadvantaged;
    }
    groups.shuffle(rng);
    groups
}

/// Capacity, patience and rate draws shared by the generator and the trip
/// record pipeline.
pub(crate) struct TypeDraws {
    pub capacities: Vec<u32>,
    pub patience: Vec<u32>,
    pub rates: Vec<f64>,
    pub horizon: u32,
}

pub(crate) fn draw_type_parameters(
    params: &GeneratorParams,
    num_drivers: usize,
    num_riders: usize,
    rng: &mut ChaCha8Rng,
) -> TypeDraws {
    let capacities = (0..num_drivers)
        .map(|_| rng.random_range(1..=params.capacity_bound))
        .collect();
    let patience = (0..num_riders)
        .map(|_| *params.patience_choices.choose(rng).expect("nonempty"))
        .collect();
    let normal = Normal::new(params.rate_mean, params.rate_stddev).expect("validated");
    let mut rates: Vec<f64> = (0..num_riders)
        .map(|_| normal.sample(rng).max(0.1))
        .collect();
    let total: f64 = rates.iter().sum();
    let horizon = (total.round() as u32).max(1);
    let scale = f64::from(horizon) / total;
    for r in &mut rates {
        *r *= scale;
    }
    TypeDraws {
        capacities,
        patience,
        rates,
        horizon,
    }
}

pub(crate) type Cell = (u32, u32);

pub(crate) fn manhattan(a: Cell, b: Cell) -> u32 {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1)
}

pub(crate) fn cell_label(c: Cell) -> String {
    format!("{},{}", c.0, c.1)
}

pub(crate) struct DriverSpec {
    pub cell: Cell,
    pub group: Group,
}

pub(crate) struct RiderSpec {
    pub origin: Cell,
    pub destination: Cell,
    pub group: Group,
    pub trip_length: f64,
}

/// Assembles an instance from located, labelled types: draws capacities,
/// patience and rates, connects riders to drivers within the distance
/// threshold and normalizes weights by `max_trip_length`.
pub(crate) fn assemble(
    params: &GeneratorParams,
    drivers: &[DriverSpec],
    riders: &[RiderSpec],
    max_trip_length: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Instance> {
    let draws = draw_type_parameters(params, drivers.len(), riders.len(), rng);
    let driver_types: Vec<DriverType> = drivers
        .iter()
        .enumerate()
        .map(|(i, d)| DriverType {
            id: format!("u{i}"),
            capacity: draws.capacities[i],
            attributes: Attributes::from([
                ("cell".to_string(), cell_label(d.cell)),
                ("group".to_string(), d.group.label().to_string()),
            ]),
        })
        .collect();
    let rider_types: Vec<RiderType> = riders
        .iter()
        .enumerate()
        .map(|(j, r)| RiderType {
            id: format!("v{j}"),
            arrival_rate: draws.rates[j],
            patience: draws.patience[j],
            attributes: Attributes::from([
                ("origin".to_string(), cell_label(r.origin)),
                ("destination".to_string(), cell_label(r.destination)),
                ("group".to_string(), r.group.label().to_string()),
                ("trip_length".to_string(), r.trip_length.to_string()),
            ]),
        })
        .collect();

    let mut edges = Vec::new();
    for (j, r) in riders.iter().enumerate() {
        let before = edges.len();
        for (i, d) in drivers.iter().enumerate() {
            if manhattan(d.cell, r.origin) <= params.edge_distance_threshold {
                edges.push(Edge {
                    id: format!("e{}", edges.len()),
                    driver: driver_types[i].id.clone(),
                    rider: rider_types[j].id.clone(),
                    accept_prob: params.accept_prob(d.group, r.group),
                    weight: (r.trip_length / max_trip_length).clamp(0.0, 1.0),
                });
            }
        }
        if edges.len() == before {
            return Err(Error::Generation(format!(
                "rider type v{j} at cell {} has no compatible driver",
                cell_label(r.origin)
            )));
        }
    }
    Ok(Instance {
        drivers: driver_types,
        riders: rider_types,
        edges,
        horizon: draws.horizon,
    })
}

/// Synthetic city: drivers placed uniformly on the grid, each rider type
/// anchored within the distance threshold of some driver (every driver
/// anchors at least one rider when there are enough riders), destinations
/// uniform. Trip length is the Manhattan distance plus one cell.
pub fn gen_synthetic(params: &GeneratorParams) -> Result<Instance> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let (rows, cols) = (params.grid_rows, params.grid_cols);
    let nu = params.num_driver_types;
    let nv = params.num_rider_types;

    let driver_groups = assign_groups(nu, &mut rng);
    let rider_groups = assign_groups(nv, &mut rng);

    let drivers: Vec<DriverSpec> = driver_groups
        .into_iter()
        .map(|group| DriverSpec {
            cell: (rng.random_range(0..rows), rng.random_range(0..cols)),
            group,
        })
        .collect();

    let reach = params.edge_distance_threshold as i64;
    let mut riders = Vec::with_capacity(nv);
    for (j, group) in rider_groups.into_iter().enumerate() {
        let anchor = if j < nu { j } else { rng.random_range(0..nu) };
        let (ar, ac) = drivers[anchor].cell;
        let mut near = Vec::new();
        for dr in -reach..=reach {
            for dc in -(reach - dr.abs())..=(reach - dr.abs()) {
                let (r, c) = (ar as i64 + dr, ac as i64 + dc);
                if (0..rows as i64).contains(&r) && (0..cols as i64).contains(&c) {
                    near.push((r as u32, c as u32));
                }
            }
        }
        let origin = *near.choose(&mut rng).expect("anchor cell is in range");
        let destination = (rng.random_range(0..rows), rng.random_range(0..cols));
        riders.push(RiderSpec {
            origin,
            destination,
            group,
            trip_length: f64::from(manhattan(origin, destination) + 1),
        });
    }
    let max_len = riders.iter().map(|r| r.trip_length).fold(0.0, f64::max);
    assemble(params, &drivers, &riders, max_len, &mut rng)
}
