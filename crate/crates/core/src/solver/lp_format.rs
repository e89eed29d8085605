//! CPLEX LP text export.

use std::fmt::Write as _;
use std::path::Path;

use super::{Integrality, LinearModel, RowSense};
use crate::error::{Error, Result};

const TERMS_PER_LINE: usize = 8;

fn sanitize(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "_.[]".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    if out.starts_with(|c: char| c.is_ascii_digit() || c == '.') || out.is_empty() {
        out.insert(0, '_');
    }
    out
}

fn number(x: f64) -> String {
    if x == f64::INFINITY {
        "+inf".into()
    } else if x == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{x:?}")
    }
}

fn write_terms(out: &mut String, terms: impl Iterator<Item = (f64, String)>) -> bool {
    let mut any = false;
    for (k, (a, name)) in terms.enumerate() {
        if k > 0 && k % TERMS_PER_LINE == 0 {
            out.push_str("\n   ");
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {name}", number(a.abs()));
        any = true;
    }
    any
}

/// Renders the model in CPLEX LP format. Variables and rows are written in
/// model order, so the output is deterministic.
pub fn export_lp(model: &LinearModel) -> String {
    let names: Vec<String> = model.variables().iter().map(|v| sanitize(&v.name)).collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", model.name);
    out.push_str("Minimize\n obj:");
    let nonzero = model
        .objective()
        .iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(j, c)| (*c, names[j].clone()));
    if !write_terms(&mut out, nonzero) {
        if let Some(first) = names.first() {
            let _ = write!(out, " 0 {first}");
        }
    }
    out.push_str("\nSubject To\n");
    for row in model.constraints() {
        let _ = write!(out, " {}:", sanitize(&row.name));
        let terms = row
            .terms
            .iter()
            .filter(|(_, a)| *a != 0.0)
            .map(|(v, a)| (*a, names[v.0].clone()));
        if !write_terms(&mut out, terms) {
            if let Some(first) = names.first() {
                let _ = write!(out, " 0 {first}");
            }
        }
        let op = match row.sense {
            RowSense::Le => "<=",
            RowSense::Ge => ">=",
            RowSense::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", number(row.rhs));
    }
    out.push_str("Bounds\n");
    for (v, name) in model.variables().iter().zip(&names) {
        if v.integrality == Integrality::Binary && v.lower == 0.0 && v.upper == 1.0 {
            continue;
        }
        if v.lower == f64::NEG_INFINITY && v.upper == f64::INFINITY {
            let _ = writeln!(out, " {name} free");
        } else if v.lower != 0.0 || v.upper != f64::INFINITY {
            let _ = writeln!(out, " {} <= {name} <= {}", number(v.lower), number(v.upper));
        }
    }
    let binaries: Vec<&String> = model
        .variables()
        .iter()
        .zip(&names)
        .filter(|(v, _)| v.integrality == Integrality::Binary)
        .map(|(_, n)| n)
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            out.push(' ');
            out.push_str(&chunk.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" "));
            out.push('\n');
        }
    }
    out.push_str("End\n");
    out
}

pub fn write_lp(model: &LinearModel, path: &Path) -> Result<()> {
    std::fs::write(path, export_lp(model)).map_err(|e| Error::io(path, e))
}
