//! CPLEX-style LP text: `Maximize`, `st`, `Bounds`, `End`.
//!
//! Variables are written as `x<index>_<label>` with non-identifier characters
//! of the label replaced by `_`, so names stay unique and readable by
//! external solvers.

use std::fmt::Write;

use super::{Constraint, LpModel, Relation};
use crate::error::{Error, Result};

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

fn var_name(j: usize, label: &str) -> String {
    format!("x{j}_{}", sanitize(label))
}

fn write_terms(out: &mut String, coeffs: &[f64], names: &[String]) {
    let mut any = false;
    for (a, name) in coeffs.iter().zip(names) {
        if *a == 0.0 {
            continue;
        }
        let sign = if *a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {name}", a.abs());
        any = true;
    }
    if !any {
        out.push_str(" 0 ");
        out.push_str(names.first().map(String::as_str).unwrap_or("x0"));
    }
}

pub(super) fn write_lp_text(model: &LpModel) -> String {
    let names: Vec<String> = model
        .labels
        .iter()
        .enumerate()
        .map(|(j, l)| var_name(j, l))
        .collect();
    let mut out = String::from("\\ generated by fairdispatch\nMaximize\n obj:");
    write_terms(&mut out, &model.objective, &names);
    out.push_str("\nst\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", sanitize(&c.name));
        write_terms(&mut out, &c.coeffs, &names);
        let rel = match c.relation {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        };
        let _ = writeln!(out, " {rel} {}", c.rhs);
    }
    out.push_str("Bounds\n");
    for (name, (lo, hi)) in names.iter().zip(&model.bounds) {
        if hi.is_infinite() {
            let _ = writeln!(out, " {lo} <= {name} <= +inf");
        } else {
            let _ = writeln!(out, " {lo} <= {name} <= {hi}");
        }
    }
    out.push_str("End\n");
    out
}

fn parse_num(tok: &str) -> Option<f64> {
    match tok.to_ascii_lowercase().as_str() {
        "+inf" | "inf" | "+infinity" | "infinity" => Some(f64::INFINITY),
        "-inf" | "-infinity" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

fn parse_terms(
    tokens: &[&str],
    index: &mut dyn FnMut(&str) -> usize,
) -> Result<Vec<(usize, f64)>> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for tok in tokens {
        match *tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            t => {
                if let Some(c) = parse_num(t) {
                    coef = Some(c);
                } else {
                    terms.push((index(t), sign * coef.unwrap_or(1.0)));
                    sign = 1.0;
                    coef = None;
                }
            }
        }
    }
    if coef.is_some() {
        return Err(Error::Parse("dangling coefficient in LP text".into()));
    }
    Ok(terms)
}

#[derive(PartialEq)]
enum Section {
    Head,
    Objective,
    Rows,
    Bounds,
    Done,
}

/// Reads LP text written by [`LpModel::to_lp_text`] (maximization, `≤ ≥ =`
/// rows, two-sided bounds). Variable order is the order of first appearance.
pub fn parse_lp_text(text: &str) -> Result<LpModel> {
    let mut names: Vec<String> = Vec::new();
    let mut lookup = std::collections::HashMap::new();
    let mut index = |name: &str| -> usize {
        *lookup.entry(name.to_string()).or_insert_with(|| {
            names.push(name.to_string());
            names.len() - 1
        })
    };

    let mut objective = Vec::new();
    let mut rows: Vec<(String, Vec<(usize, f64)>, Relation, f64)> = Vec::new();
    let mut bounds: Vec<(usize, f64, f64)> = Vec::new();
    let mut section = Section::Head;

    // Register variables in bound order first so the column order survives
    // zero objective coefficients.
    let mut in_bounds = false;
    for raw in text.lines() {
        let line = raw.split('\\').next().unwrap_or("").trim();
        match line.to_ascii_lowercase().as_str() {
            "bounds" => in_bounds = true,
            "end" => in_bounds = false,
            _ if in_bounds => {
                if let Some(name) = line.split_whitespace().nth(2) {
                    index(name);
                }
            }
            _ => {}
        }
    }

    for raw in text.lines() {
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.to_ascii_lowercase().as_str() {
            "maximize" | "max" => {
                section = Section::Objective;
                continue;
            }
            "minimize" | "min" => return Err(Error::Parse("only maximization is supported".into())),
            "st" | "s.t." | "subject to" => {
                section = Section::Rows;
                continue;
            }
            "bounds" => {
                section = Section::Bounds;
                continue;
            }
            "end" => {
                section = Section::Done;
                continue;
            }
            _ => {}
        }
        let body = match line.split_once(':') {
            Some((_, rest)) if section != Section::Bounds => rest,
            _ => line,
        };
        let tokens: Vec<&str> = body.split_whitespace().collect();
        match section {
            Section::Objective => objective.extend(parse_terms(&tokens, &mut index)?),
            Section::Rows => {
                let name = line.split_once(':').map(|(n, _)| n.trim()).unwrap_or("").to_string();
                let pos = tokens
                    .iter()
                    .position(|t| matches!(*t, "<=" | ">=" | "=" | "=<" | "=>"))
                    .ok_or_else(|| Error::Parse(format!("constraint without relation: {line}")))?;
                let relation = match tokens[pos] {
                    "<=" | "=<" => Relation::Le,
                    ">=" | "=>" => Relation::Ge,
                    _ => Relation::Eq,
                };
                let rhs = tokens
                    .get(pos + 1)
                    .and_then(|t| parse_num(t))
                    .ok_or_else(|| Error::Parse(format!("bad right-hand side: {line}")))?;
                let terms = parse_terms(&tokens[..pos], &mut index)?;
                rows.push((name, terms, relation, rhs));
            }
            Section::Bounds => {
                let bad = || Error::Parse(format!("unsupported bound line: {line}"));
                if tokens.len() != 5 || tokens[1] != "<=" || tokens[3] != "<=" {
                    return Err(bad());
                }
                let lo = parse_num(tokens[0]).ok_or_else(bad)?;
                let hi = parse_num(tokens[4]).ok_or_else(bad)?;
                bounds.push((index(tokens[2]), lo, hi));
            }
            Section::Head | Section::Done => {
                return Err(Error::Parse(format!("unexpected line outside a section: {line}")))
            }
        }
    }

    let n = names.len();
    let mut model = LpModel {
        objective: vec![0.0; n],
        constraints: Vec::with_capacity(rows.len()),
        bounds: vec![(0.0, f64::INFINITY); n],
        labels: names,
    };
    for (j, c) in objective {
        model.objective[j] += c;
    }
    for (name, terms, relation, rhs) in rows {
        let mut coeffs = vec![0.0; n];
        for (j, c) in terms {
            coeffs[j] += c;
        }
        model.constraints.push(Constraint {
            name,
            coeffs,
            relation,
            rhs,
        });
    }
    for (j, lo, hi) in bounds {
        model.bounds[j] = (lo, hi);
    }
    Ok(model)
}
