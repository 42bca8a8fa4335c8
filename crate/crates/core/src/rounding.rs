//! Dependent rounding on a star.
//!
//! A fractional vector over one rider's edges is turned into a binary vector
//! with the same marginals, with the number of ones equal to the floor or the
//! ceiling of the fractional sum, and with pairwise negatively correlated
//! entries. Each step takes the two lowest-indexed fractional entries and
//! shifts mass between them until one becomes integral; a single leftover
//! fractional entry is settled by an independent coin.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{invalid, Result};

/// Entries within this distance of 0 or 1 are treated as integral.
pub const SNAP_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FractionalVector {
    pub ids: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryVector {
    pub ids: Vec<usize>,
    pub values: Vec<bool>,
}

impl FractionalVector {
    pub fn new(ids: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if ids.len() != values.len() {
            return Err(invalid("z", "ids and values differ in length"));
        }
        let mut seen = ids.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("z", "duplicate edge ids"));
        }
        check_values(&values)?;
        Ok(FractionalVector { ids, values })
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn check_values(values: &[f64]) -> Result<()> {
    match values
        .iter()
        .find(|v| !(**v >= -SNAP_TOL && **v <= 1.0 + SNAP_TOL))
    {
        Some(v) => Err(invalid("z", format!("entry {v} is outside [0,1]"))),
        None => Ok(()),
    }
}

fn snap(v: f64) -> f64 {
    if v <= SNAP_TOL {
        0.0
    } else if v >= 1.0 - SNAP_TOL {
        1.0
    } else {
        v
    }
}

fn is_fractional(v: f64) -> bool {
    v > 0.0 && v < 1.0
}

/// The two lowest-indexed fractional positions, or the single one left.
enum Next {
    Pair(usize, usize),
    Single(usize),
    Done,
}

fn next(values: &[f64]) -> Next {
    let mut it = values
        .iter()
        .enumerate()
        .filter(|(_, v)| is_fractional(**v))
        .map(|(k, _)| k);
    match (it.next(), it.next()) {
        (Some(i), Some(j)) => Next::Pair(i, j),
        (Some(i), None) => Next::Single(i),
        _ => Next::Done,
    }
}

/// One pairing step on `(z_i, z_j)`: the two possible results and the
/// probability of the first. Each result has at least one integral entry.
fn pair_step(zi: f64, zj: f64) -> ((f64, f64), (f64, f64), f64) {
    let d1 = (1.0 - zi).min(zj);
    let d2 = zi.min(1.0 - zj);
    let up = if 1.0 - zi <= zj {
        (1.0, snap(zj - d1))
    } else {
        (snap(zi + zj), 0.0)
    };
    let down = if zi <= 1.0 - zj {
        (0.0, snap(zj + zi))
    } else {
        (snap(zi - d2), 1.0)
    };
    (up, down, d2 / (d1 + d2))
}

/// Rounds `values` with fresh randomness from `rng`.
pub fn round_values<R: Rng + ?Sized>(values: &[f64], rng: &mut R) -> Result<Vec<bool>> {
    check_values(values)?;
    let mut z: Vec<f64> = values.iter().map(|&v| snap(v)).collect();
    loop {
        match next(&z) {
            Next::Pair(i, j) => {
                let (up, down, p_up) = pair_step(z[i], z[j]);
                let (a, b) = if rng.random::<f64>() < p_up { up } else { down };
                z[i] = a;
                z[j] = b;
            }
            Next::Single(i) => {
                z[i] = if rng.random::<f64>() < z[i] { 1.0 } else { 0.0 };
            }
            Next::Done => break,
        }
    }
    let out: Vec<bool> = z.iter().map(|&v| v == 1.0).collect();
    let total: f64 = values.iter().sum();
    let ones = out.iter().filter(|&&b| b).count() as f64;
    assert!(
        ones >= (total - 1e-9).floor() && ones <= (total + 1e-9).ceil(),
        "degree preservation violated: {ones} ones for fractional sum {total}"
    );
    Ok(out)
}

pub fn round<R: Rng + ?Sized>(z: &FractionalVector, rng: &mut R) -> Result<BinaryVector> {
    Ok(BinaryVector {
        ids: z.ids.clone(),
        values: round_values(&z.values, rng)?,
    })
}

/// Exact outcome distribution of [`round_values`], by expanding every
/// pairing step and the final coin. Outcomes are merged and sorted.
pub fn outcome_distribution(values: &[f64]) -> Result<Vec<(Vec<bool>, f64)>> {
    check_values(values)?;
    let z: Vec<f64> = values.iter().map(|&v| snap(v)).collect();
    let mut leaves = BTreeMap::new();
    expand(z, 1.0, &mut leaves);
    Ok(leaves.into_iter().collect())
}

fn expand(mut z: Vec<f64>, prob: f64, out: &mut BTreeMap<Vec<bool>, f64>) {
    if prob == 0.0 {
        return;
    }
    match next(&z) {
        Next::Pair(i, j) => {
            let (up, down, p_up) = pair_step(z[i], z[j]);
            let mut other = z.clone();
            (z[i], z[j]) = up;
            (other[i], other[j]) = down;
            expand(z, prob * p_up, out);
            expand(other, prob * (1.0 - p_up), out);
        }
        Next::Single(i) => {
            let p = z[i];
            let mut other = z.clone();
            z[i] = 1.0;
            other[i] = 0.0;
            expand(z, prob * p, out);
            expand(other, prob * (1.0 - p), out);
        }
        Next::Done => {
            *out.entry(z.iter().map(|&v| v == 1.0).collect()).or_insert(0.0) += prob;
        }
    }
}
