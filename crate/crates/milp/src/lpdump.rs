//! Plain-text LP dump for inspection with external tools.

use std::fmt::Write;

use crate::model::{MilpModel, Sense, VarKind};

fn clean(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn term(out: &mut String, c: f64, name: &str, first: bool) {
    if c < 0.0 {
        let _ = write!(out, " - {} {}", -c, name);
    } else if first {
        let _ = write!(out, " {} {}", c, name);
    } else {
        let _ = write!(out, " + {} {}", c, name);
    }
}

/// Renders the model in CPLEX LP syntax.
pub fn write_lp(model: &MilpModel) -> String {
    let names: Vec<String> = model.vars.iter().map(|v| clean(&v.name)).collect();
    let mut out = String::new();
    let _ = writeln!(out, "\\ {}", model.name);
    out.push_str("Minimize\n obj:");
    let mut first = true;
    for (i, &c) in model.objective.iter().enumerate() {
        if c != 0.0 {
            term(&mut out, c, &names[i], first);
            first = false;
        }
    }
    if model.obj_offset != 0.0 || first {
        term(&mut out, model.obj_offset, "", first);
    }
    out.push_str("\nSubject To\n");
    for (k, c) in model.cons.iter().enumerate() {
        let _ = write!(out, " r{}_{}:", k, clean(&c.name));
        let mut first = true;
        for &(v, a) in &c.terms {
            term(&mut out, a, &names[v.0], first);
            first = false;
        }
        if first {
            out.push_str(" 0 x_dummy");
        }
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {} {}", op, c.rhs);
    }
    out.push_str("Bounds\n");
    for (v, n) in model.vars.iter().zip(&names) {
        let lo = if v.lower == f64::NEG_INFINITY { "-inf".to_string() } else { v.lower.to_string() };
        let hi = if v.upper == f64::INFINITY { "+inf".to_string() } else { v.upper.to_string() };
        let _ = writeln!(out, " {} <= {} <= {}", lo, n, hi);
    }
    for (label, kind) in [("Binaries", VarKind::Binary), ("General", VarKind::Integer)] {
        let list: Vec<&str> = model
            .vars
            .iter()
            .zip(&names)
            .filter(|(v, _)| v.kind == kind)
            .map(|(_, n)| n.as_str())
            .collect();
        if !list.is_empty() {
            let _ = writeln!(out, "{}\n {}", label, list.join(" "));
        }
    }
    out.push_str("End\n");
    out
}
