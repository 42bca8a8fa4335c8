use std::collections::BTreeSet;
use std::path::PathBuf;

use fairdispatch::instance::{ingest_trip_records, GeneratorParams, IngestOptions};

fn sample_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/trips_sample.csv")
}

struct Counts {
    malformed: usize,
    outside_window: usize,
    outside_box: usize,
    pairs: BTreeSet<((i64, i64), (i64, i64))>,
}

/// One pass over the raw text with plain string handling.
fn count_by_hand(rows: i64, cols: i64) -> Counts {
    let text = std::fs::read_to_string(sample_path()).unwrap();
    let mut c = Counts {
        malformed: 0,
        outside_window: 0,
        outside_box: 0,
        pairs: BTreeSet::new(),
    };
    let cell = |lon: f64, lat: f64| {
        let r = (((lat - 40.4) / 0.55) * rows as f64).floor() as i64;
        let k = (((lon + 75.0) / 2.0) * cols as f64).floor() as i64;
        (r.min(rows - 1), k.min(cols - 1))
    };
    let inside = |lon: f64, lat: f64| -75.0 < lon && lon < -73.0 && 40.4 < lat && lat < 40.95;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let nums: Option<Vec<f64>> = f[1..6].iter().map(|s| s.parse().ok()).collect();
        let Some(n) = nums else {
            c.malformed += 1;
            continue;
        };
        let hour: u32 = f[0][11..13].parse().unwrap();
        if hour != 16 {
            c.outside_window += 1;
            continue;
        }
        if !inside(n[0], n[1]) || !inside(n[2], n[3]) {
            c.outside_box += 1;
            continue;
        }
        c.pairs.insert((cell(n[0], n[1]), cell(n[2], n[3])));
    }
    c
}

#[test]
fn sample_file_counts_match_hand_count() {
    let params = GeneratorParams::default();
    let (inst, report) = ingest_trip_records(&sample_path(), &params, &IngestOptions::default()).unwrap();
    let c = count_by_hand(i64::from(params.grid_rows), i64::from(params.grid_cols));
    assert_eq!(report.rows, 200);
    assert!(c.malformed > 0 && c.outside_window > 0 && c.outside_box > 0);
    assert_eq!(report.malformed, c.malformed);
    assert_eq!(report.outside_window, c.outside_window);
    assert_eq!(report.outside_box, c.outside_box);
    assert!(c.pairs.len() <= params.num_rider_types);
    assert_eq!(inst.riders.len(), c.pairs.len());
    let origins: BTreeSet<_> = c.pairs.iter().map(|p| p.0).collect();
    assert_eq!(inst.drivers.len(), origins.len().min(params.num_driver_types));
    assert!(inst.validate().is_empty());
    assert!(inst.edges.iter().all(|e| e.weight <= 1.0 && e.accept_prob >= params.scale_eta));
}

#[test]
fn ingestion_is_deterministic() {
    let params = GeneratorParams {
        seed: 99,
        ..Default::default()
    };
    let a = ingest_trip_records(&sample_path(), &params, &IngestOptions::default()).unwrap();
    let b = ingest_trip_records(&sample_path(), &params, &IngestOptions::default()).unwrap();
    assert_eq!(a, b);
}
