//! Dense two-phase primal simplex over bounded variables.
//!
//! Every structural variable is shifted to `[0, upper - lower]`, each row
//! gets a slack (fixed at zero for equalities) and rows whose slack cannot
//! start basic get an artificial. Entering and leaving choices follow Bland's
//! rule, so the pivot sequence and the returned vertex are deterministic.

use super::{LpModel, LpSolution, Relation, Status};
use crate::error::{Error, Result};

pub const FEAS_TOL: f64 = 1e-8;
pub const OPT_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFRESH_EVERY: usize = 50;

struct Tableau {
    rows: usize,
    cols: usize,
    /// `B⁻¹A`, row-major.
    t: Vec<f64>,
    /// Sign-normalized original rows, kept for refreshing basic values.
    a: Vec<f64>,
    rhs: Vec<f64>,
    upper: Vec<f64>,
    basis: Vec<usize>,
    /// Position of each variable in `basis`, if basic.
    row_of: Vec<Option<usize>>,
    at_upper: Vec<bool>,
    xb: Vec<f64>,
    /// Column of the initial identity basis for each row.
    unit_col: Vec<usize>,
    /// Variables that may never enter.
    banned: Vec<bool>,
    pivots: usize,
}

enum Step {
    Optimal,
    Unbounded,
    Moved,
}

impl Tableau {
    fn value(&self, j: usize) -> f64 {
        match self.row_of[j] {
            Some(r) => self.xb[r],
            None if self.at_upper[j] => self.upper[j],
            None => 0.0,
        }
    }

    fn reduced_costs(&self, c: &[f64]) -> Vec<f64> {
        let mut d = c.to_vec();
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = c[b];
            if cb != 0.0 {
                let row = &self.t[r * self.cols..(r + 1) * self.cols];
                for (dj, tj) in d.iter_mut().zip(row) {
                    *dj -= cb * tj;
                }
            }
        }
        d
    }

    /// Recomputes basic values from the original rows: `x_B = B⁻¹(b - N x_N)`.
    fn refresh(&mut self) {
        let mut resid = self.rhs.clone();
        for j in 0..self.cols {
            if self.row_of[j].is_none() && self.at_upper[j] {
                let u = self.upper[j];
                for (i, ri) in resid.iter_mut().enumerate() {
                    *ri -= self.a[i * self.cols + j] * u;
                }
            }
        }
        for r in 0..self.rows {
            let row = &self.t[r * self.cols..(r + 1) * self.cols];
            let v: f64 = self
                .unit_col
                .iter()
                .zip(&resid)
                .map(|(&k, &ri)| row[k] * ri)
                .sum();
            self.xb[r] = v;
        }
    }

    fn pivot(&mut self, r: usize, j: usize, d: &mut [f64]) {
        let cols = self.cols;
        let p = self.t[r * cols + j];
        {
            let row = &mut self.t[r * cols..(r + 1) * cols];
            for x in row.iter_mut() {
                *x /= p;
            }
            row[j] = 1.0;
        }
        let pivot_row: Vec<f64> = self.t[r * cols..(r + 1) * cols].to_vec();
        for i in 0..self.rows {
            if i == r {
                continue;
            }
            let f = self.t[i * cols + j];
            if f != 0.0 {
                let row = &mut self.t[i * cols..(i + 1) * cols];
                for (x, pr) in row.iter_mut().zip(&pivot_row) {
                    *x -= f * pr;
                }
                row[j] = 0.0;
            }
        }
        let f = d[j];
        if f != 0.0 {
            for (x, pr) in d.iter_mut().zip(&pivot_row) {
                *x -= f * pr;
            }
            d[j] = 0.0;
        }
        let leaving = self.basis[r];
        self.row_of[leaving] = None;
        self.basis[r] = j;
        self.row_of[j] = Some(r);
        self.pivots += 1;
    }

    fn step(&mut self, d: &mut [f64]) -> Step {
        let entering = (0..self.cols).find(|&j| {
            if self.row_of[j].is_some() || self.banned[j] || self.upper[j] <= 0.0 {
                return false;
            }
            if self.at_upper[j] {
                d[j] < -OPT_TOL
            } else {
                d[j] > OPT_TOL
            }
        });
        let Some(j) = entering else {
            return Step::Optimal;
        };
        let sigma = if self.at_upper[j] { -1.0 } else { 1.0 };

        // Ratio test; ties go to the smallest basic variable index.
        let mut theta = self.upper[j];
        let mut leave: Option<(usize, bool)> = None;
        for i in 0..self.rows {
            let a = sigma * self.t[i * self.cols + j];
            let (limit, to_upper) = if a > PIVOT_TOL {
                (self.xb[i].max(0.0) / a, false)
            } else if a < -PIVOT_TOL && self.upper[self.basis[i]].is_finite() {
                ((self.upper[self.basis[i]] - self.xb[i]).max(0.0) / -a, true)
            } else {
                continue;
            };
            let better = match leave {
                _ if limit < theta - 1e-12 => true,
                Some((r, _)) if limit <= theta + 1e-12 => self.basis[i] < self.basis[r],
                _ => false,
            };
            if better {
                theta = limit.min(theta);
                leave = Some((i, to_upper));
            }
        }
        if theta.is_infinite() {
            return Step::Unbounded;
        }

        let entering_value = self.value(j) + sigma * theta;
        for i in 0..self.rows {
            let a = self.t[i * self.cols + j];
            if a != 0.0 {
                self.xb[i] -= sigma * theta * a;
            }
        }
        match leave {
            None => {
                self.at_upper[j] = !self.at_upper[j];
            }
            Some((r, to_upper)) => {
                let leaving = self.basis[r];
                self.at_upper[leaving] = to_upper;
                self.pivot(r, j, d);
                self.at_upper[j] = false;
                self.xb[r] = entering_value;
                if self.pivots % REFRESH_EVERY == 0 {
                    self.refresh();
                }
            }
        }
        Step::Moved
    }

    fn run(&mut self, c: &[f64]) -> Status {
        let mut d = self.reduced_costs(c);
        loop {
            match self.step(&mut d) {
                Step::Optimal => {
                    // Guard against drift in the incrementally updated costs.
                    self.refresh();
                    let fresh = self.reduced_costs(c);
                    let drifted = fresh.iter().zip(&d).any(|(a, b)| (a - b).abs() > 1e-7);
                    if drifted {
                        d = fresh;
                        continue;
                    }
                    return Status::Optimal;
                }
                Step::Unbounded => return Status::Unbounded,
                Step::Moved => {}
            }
        }
    }
}

pub fn solve(model: &LpModel) -> Result<LpSolution> {
    model.check_dimensions()?;
    let n = model.num_vars();
    let m = model.constraints.len();

    for &(lo, hi) in &model.bounds {
        if !lo.is_finite() {
            return Err(Error::DimensionMismatch(
                "variables need finite lower bounds".into(),
            ));
        }
        if hi < lo {
            return Ok(LpSolution::without_values(model, Status::Infeasible));
        }
    }

    // Row data after shifting x = lower + x'.
    let mut rows: Vec<(Vec<f64>, f64, f64)> = Vec::with_capacity(m); // (coeffs, slack coeff, rhs)
    for c in &model.constraints {
        let shift: f64 = c
            .coeffs
            .iter()
            .zip(&model.bounds)
            .map(|(a, (lo, _))| a * lo)
            .sum();
        let mut coeffs = c.coeffs.clone();
        let mut slack = match c.relation {
            Relation::Le => 1.0,
            Relation::Ge => -1.0,
            Relation::Eq => 0.0,
        };
        let mut rhs = c.rhs - shift;
        if rhs < 0.0 {
            coeffs.iter_mut().for_each(|x| *x = -*x);
            slack = -slack;
            rhs = -rhs;
        }
        rows.push((coeffs, slack, rhs));
    }
    let needs_art: Vec<bool> = rows.iter().map(|(_, s, _)| *s != 1.0).collect();
    let k = needs_art.iter().filter(|&&b| b).count();
    let cols = n + m + k;

    let mut t = vec![0.0; m * cols];
    let mut upper = vec![f64::INFINITY; cols];
    for (j, &(lo, hi)) in model.bounds.iter().enumerate() {
        upper[j] = hi - lo;
    }
    let mut basis = Vec::with_capacity(m);
    let mut art = n + m;
    let mut artificials = Vec::new();
    for (i, (coeffs, slack, _)) in rows.iter().enumerate() {
        let row = &mut t[i * cols..(i + 1) * cols];
        row[..n].copy_from_slice(coeffs);
        row[n + i] = *slack;
        if *slack == 0.0 {
            upper[n + i] = 0.0;
        }
        if needs_art[i] {
            row[art] = 1.0;
            basis.push(art);
            artificials.push(art);
            art += 1;
        } else {
            basis.push(n + i);
        }
    }
    let mut row_of = vec![None; cols];
    for (r, &b) in basis.iter().enumerate() {
        row_of[b] = Some(r);
    }
    let mut tab = Tableau {
        rows: m,
        cols,
        a: t.clone(),
        t,
        rhs: rows.iter().map(|r| r.2).collect(),
        upper,
        unit_col: basis.clone(),
        basis,
        row_of,
        at_upper: vec![false; cols],
        xb: rows.iter().map(|r| r.2).collect(),
        banned: vec![false; cols],
        pivots: 0,
    };

    if k > 0 {
        let mut c1 = vec![0.0; cols];
        for &a in &artificials {
            c1[a] = -1.0;
        }
        tab.run(&c1);
        let infeas: f64 = artificials.iter().map(|&a| tab.value(a)).sum();
        if infeas > FEAS_TOL {
            return Ok(LpSolution::without_values(model, Status::Infeasible));
        }
        // Drive zero-valued artificials out of the basis where possible; rows
        // where that fails are redundant and keep their artificial pinned at 0.
        let mut d = vec![0.0; cols];
        for r in 0..m {
            if tab.basis[r] < n + m {
                continue;
            }
            let candidate = (0..n + m).find(|&j| {
                tab.row_of[j].is_none() && tab.t[r * cols + j].abs() > 1e-7
            });
            if let Some(j) = candidate {
                let v = tab.value(j);
                tab.pivot(r, j, &mut d);
                tab.at_upper[j] = false;
                tab.xb[r] = v;
            }
        }
        for &a in &artificials {
            tab.banned[a] = true;
            tab.upper[a] = 0.0;
            if tab.row_of[a].is_none() {
                tab.at_upper[a] = false;
            }
        }
        tab.refresh();
    }

    let mut c2 = vec![0.0; cols];
    c2[..n].copy_from_slice(&model.objective);
    let status = tab.run(&c2);
    if status != Status::Optimal {
        return Ok(LpSolution::without_values(model, status));
    }
    let values: Vec<f64> = (0..n)
        .map(|j| {
            let (lo, hi) = model.bounds[j];
            (lo + tab.value(j)).clamp(lo, hi)
        })
        .collect();
    let objective_value = model.objective.iter().zip(&values).map(|(c, x)| c * x).sum();
    Ok(LpSolution {
        labels: model.labels.clone(),
        values,
        objective_value,
        status: Status::Optimal,
    })
}
