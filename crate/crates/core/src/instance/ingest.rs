//! Trip-record ingestion: filters taxi trips to a time window and bounding
//! box, bins coordinates on the grid and turns the surviving trips into
//! driver and rider types.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::generate::{assemble, assign_groups, Cell, DriverSpec, GeneratorParams, RiderSpec};
use super::Instance;
use crate::error::{invalid, Error, Result};

pub const LON_RANGE: (f64, f64) = (-75.0, -73.0);
pub const LAT_RANGE: (f64, f64) = (40.4, 40.95);

pub const COLUMNS: [&str; 6] = [
    "pickup_longitude",
    "pickup_latitude",
    "dropoff_longitude",
    "dropoff_latitude",
    "trip_distance",
    "pickup_datetime",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestOptions {
    pub delimiter: char,
    /// Inclusive start of the pickup time-of-day window, `HH:MM[:SS]`.
    pub window_start: String,
    /// Exclusive end of the window.
    pub window_end: String,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions {
            delimiter: ',',
            window_start: "16:00".into(),
            window_end: "17:00".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub rows: usize,
    pub malformed: usize,
    pub outside_window: usize,
    pub outside_box: usize,
    pub kept: usize,
    pub rider_types: usize,
    pub driver_types: usize,
}

struct Trip {
    origin: Cell,
    destination: Cell,
    distance: f64,
}

fn parse_clock(text: &str) -> Option<u32> {
    let mut parts = text.trim().split(':');
    let h: u32 = parts.next()?.parse().ok()?;
    let m: u32 = parts.next()?.parse().ok()?;
    let s: f64 = match parts.next() {
        Some(s) => s.parse().ok()?,
        None => 0.0,
    };
    if parts.next().is_some() || h > 24 || m > 59 || !(0.0..60.0).contains(&s) {
        return None;
    }
    Some(h * 3600 + m * 60 + s as u32)
}

/// Seconds since midnight of a `YYYY-MM-DD HH:MM:SS` (or `T`-separated)
/// timestamp.
fn time_of_day(stamp: &str) -> Option<u32> {
    let stamp = stamp.trim();
    let clock = stamp.rsplit([' ', 'T']).next()?;
    parse_clock(clock)
}

fn in_window(secs: u32, start: u32, end: u32) -> bool {
    if start <= end {
        (start..end).contains(&secs)
    } else {
        secs >= start || secs < end
    }
}

fn to_cell(lon: f64, lat: f64, params: &GeneratorParams) -> Cell {
    let fy = (lat - LAT_RANGE.0) / (LAT_RANGE.1 - LAT_RANGE.0);
    let fx = (lon - LON_RANGE.0) / (LON_RANGE.1 - LON_RANGE.0);
    let row = ((fy * params.grid_rows as f64) as u32).min(params.grid_rows - 1);
    let col = ((fx * params.grid_cols as f64) as u32).min(params.grid_cols - 1);
    (row, col)
}

fn inside_box(lon: f64, lat: f64) -> bool {
    lon > LON_RANGE.0 && lon < LON_RANGE.1 && lat > LAT_RANGE.0 && lat < LAT_RANGE.1
}

/// Reads a delimiter-separated trip file and builds an instance.
///
/// Rider types are the distinct (pickup cell, dropoff cell) pairs among
/// surviving trips; driver types are the distinct pickup cells of the kept
/// rider types. Group labels are synthesized per type at ratio 1:2. Both
/// lists are downsampled (seeded) to the counts in `params`.
pub fn ingest_trip_records(
    path: &Path,
    params: &GeneratorParams,
    options: &IngestOptions,
) -> Result<(Instance, IngestReport)> {
    params.validate()?;
    if !options.delimiter.is_ascii() {
        return Err(invalid("delimiter", "must be a single ASCII character"));
    }
    let start = parse_clock(&options.window_start)
        .ok_or_else(|| invalid("window_start", format!("cannot parse {:?}", options.window_start)))?;
    let end = parse_clock(&options.window_end)
        .ok_or_else(|| invalid("window_end", format!("cannot parse {:?}", options.window_end)))?;

    let io_err = |source: std::io::Error| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::open(path).map_err(io_err)?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter as u8)
        .flexible(true)
        .from_reader(file);
    let headers = reader
        .headers()
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?
        .clone();
    let mut cols = [0usize; 6];
    for (slot, name) in cols.iter_mut().zip(COLUMNS) {
        *slot = headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse(format!("missing column `{name}`")))?;
    }

    let mut report = IngestReport::default();
    let mut trips = Vec::new();
    for row in reader.records() {
        report.rows += 1;
        let Ok(row) = row else {
            report.malformed += 1;
            continue;
        };
        let num = |k: usize| row.get(cols[k]).and_then(|s| s.trim().parse::<f64>().ok());
        let parsed = (|| {
            let vals = [num(0)?, num(1)?, num(2)?, num(3)?, num(4)?];
            let secs = time_of_day(row.get(cols[5])?)?;
            (vals.iter().all(|v| v.is_finite()) && vals[4] >= 0.0).then_some((vals, secs))
        })();
        let Some(([plon, plat, dlon, dlat, dist], secs)) = parsed else {
            report.malformed += 1;
            continue;
        };
        if !in_window(secs, start, end) {
            report.outside_window += 1;
            continue;
        }
        if !inside_box(plon, plat) || !inside_box(dlon, dlat) {
            report.outside_box += 1;
            continue;
        }
        trips.push(Trip {
            origin: to_cell(plon, plat, params),
            destination: to_cell(dlon, dlat, params),
            distance: dist,
        });
    }
    report.kept = trips.len();
    if trips.is_empty() {
        return Err(Error::Generation(format!(
            "no trip records in {} survive the filters",
            path.display()
        )));
    }

    let max_len = trips.iter().map(|t| t.distance).fold(0.0, f64::max);
    let mut by_type: BTreeMap<(Cell, Cell), (f64, usize)> = BTreeMap::new();
    for t in &trips {
        let acc = by_type.entry((t.origin, t.destination)).or_default();
        acc.0 += t.distance;
        acc.1 += 1;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut types: Vec<((Cell, Cell), f64)> = by_type
        .into_iter()
        .map(|(k, (sum, n))| (k, sum / n as f64))
        .collect();
    if types.len() > params.num_rider_types {
        let mut keep = sample(&mut rng, types.len(), params.num_rider_types).into_vec();
        keep.sort_unstable();
        types = keep.into_iter().map(|i| types[i]).collect();
    }

    let mut cells: Vec<Cell> = types
        .iter()
        .map(|((o, _), _)| *o)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if cells.len() > params.num_driver_types {
        let mut keep = sample(&mut rng, cells.len(), params.num_driver_types).into_vec();
        keep.sort_unstable();
        cells = keep.into_iter().map(|i| cells[i]).collect();
    }

    let driver_groups = assign_groups(cells.len(), &mut rng);
    let rider_groups = assign_groups(types.len(), &mut rng);
    let drivers: Vec<DriverSpec> = cells
        .iter()
        .zip(driver_groups)
        .map(|(&cell, group)| DriverSpec { cell, group })
        .collect();
    let riders: Vec<RiderSpec> = types
        .iter()
        .zip(rider_groups)
        .map(|(&((origin, destination), len), group)| RiderSpec {
            origin,
            destination,
            group,
            trip_length: len,
        })
        .collect();
    report.rider_types = riders.len();
    report.driver_types = drivers.len();
    let max_len = if max_len > 0.0 { max_len } else { 1.0 };
    let instance = assemble(params, &drivers, &riders, max_len, &mut rng)?;
    Ok((instance, report))
}
