//! Free-format MPS and LP-format writers. Output depends only on the model,
//! so repeated writes are byte-identical.

use std::fmt::Write;

use crate::formulation::{MipModel, VarKind};
use crate::lp::Sense;
use crate::scalar::Scalar;

fn num<T: Scalar>(v: T) -> String {
    let s = format!("{v}");
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// Free-format MPS with `OBJSENSE`; binaries sit between integer markers and
/// carry explicit bounds.
pub fn write_mps<T: Scalar>(model: &MipModel<T>, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME {name}");
    let _ = writeln!(out, "OBJSENSE");
    let _ = writeln!(out, "    {}", if model.objective.maximize { "MAX" } else { "MIN" });
    let _ = writeln!(out, "ROWS");
    let _ = writeln!(out, " N  obj");
    for c in &model.constraints {
        let s = match c.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        let _ = writeln!(out, " {s}  {}", c.name);
    }
    let mut cols: Vec<Vec<(&str, T)>> = vec![Vec::new(); model.vars.len()];
    for &(v, c) in &model.objective.terms {
        cols[v].push(("obj", c));
    }
    for c in &model.constraints {
        for &(v, a) in &c.terms {
            cols[v].push((&c.name, a));
        }
    }
    let _ = writeln!(out, "COLUMNS");
    let mut marker = 0;
    let mut in_int = false;
    for (v, var) in model.vars.iter().enumerate() {
        let int = var.kind == VarKind::Binary;
        if int != in_int {
            let tag = if int { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, "    M{marker}  'MARKER'  '{tag}'");
            marker += usize::from(!int);
            in_int = int;
        }
        if cols[v].is_empty() {
            let _ = writeln!(out, "    {}  obj  0", var.name);
        }
        for &(row, a) in &cols[v] {
            let _ = writeln!(out, "    {}  {}  {}", var.name, row, num(a));
        }
    }
    if in_int {
        let _ = writeln!(out, "    M{marker}  'MARKER'  'INTEND'");
    }
    let _ = writeln!(out, "RHS");
    if model.objective.constant != T::zero() {
        let _ = writeln!(out, "    RHS  obj  {}", num(-model.objective.constant));
    }
    for c in &model.constraints {
        if c.rhs != T::zero() {
            let _ = writeln!(out, "    RHS  {}  {}", c.name, num(c.rhs));
        }
    }
    let _ = writeln!(out, "BOUNDS");
    for var in &model.vars {
        let n = &var.name;
        match (var.lo.is_finite(), var.hi.is_finite()) {
            (false, false) => {
                let _ = writeln!(out, " FR BND  {n}");
            }
            (lo_fin, hi_fin) => {
                if lo_fin {
                    let _ = writeln!(out, " LO BND  {n}  {}", num(var.lo));
                } else {
                    let _ = writeln!(out, " MI BND  {n}");
                }
                if hi_fin {
                    let _ = writeln!(out, " UP BND  {n}  {}", num(var.hi));
                }
            }
        }
    }
    let _ = writeln!(out, "ENDATA");
    out
}

fn linear<T: Scalar>(terms: &[(usize, T)], model: &MipModel<T>) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    let mut s = String::new();
    for (i, &(v, c)) in terms.iter().enumerate() {
        let sign = if c < T::zero() { "-" } else { "+" };
        let mag = num(c.abs());
        if i == 0 {
            if c < T::zero() {
                s.push_str("- ");
            }
        } else {
            let _ = write!(s, " {sign} ");
        }
        let _ = write!(s, "{mag} {}", model.vars[v].name);
    }
    s
}

/// CPLEX LP format.
pub fn write_lp<T: Scalar>(model: &MipModel<T>, name: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "\\ {name}");
    let _ = writeln!(out, "{}", if model.objective.maximize { "Maximize" } else { "Minimize" });
    let mut obj = linear(&model.objective.terms, model);
    let k = model.objective.constant;
    if k != T::zero() {
        let _ = write!(obj, " {} {}", if k < T::zero() { "-" } else { "+" }, num(k.abs()));
    }
    let _ = writeln!(out, " obj: {obj}");
    let _ = writeln!(out, "Subject To");
    for c in &model.constraints {
        let s = match c.sense {
            Sense::Le => "<=",
            Sense::Ge => ">=",
            Sense::Eq => "=",
        };
        let _ = writeln!(out, " {}: {} {s} {}", c.name, linear(&c.terms, model), num(c.rhs));
    }
    let _ = writeln!(out, "Bounds");
    for var in &model.vars {
        if var.kind == VarKind::Binary && var.lo == T::zero() && var.hi == T::one() {
            continue;
        }
        let n = &var.name;
        let _ = match (var.lo.is_finite(), var.hi.is_finite()) {
            (false, false) => writeln!(out, " {n} free"),
            (true, true) => writeln!(out, " {} <= {n} <= {}", num(var.lo), num(var.hi)),
            (true, false) => writeln!(out, " {n} >= {}", num(var.lo)),
            (false, true) => writeln!(out, " -inf <= {n} <= {}", num(var.hi)),
        };
    }
    let bins: Vec<&str> = model
        .vars
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !bins.is_empty() {
        let _ = writeln!(out, "Binaries");
        for b in bins {
            let _ = writeln!(out, " {b}");
        }
    }
    let _ = writeln!(out, "End");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formulation::MipModel;

    fn tiny() -> MipModel<f64> {
        let mut m = MipModel::new();
        let x = m.add_var("x_0_0", VarKind::Continuous, -1.0, 2.5);
        let z = m.add_var("z_1_0_0", VarKind::Binary, 0.0, 1.0);
        let f = m.add_var("y_1_0", VarKind::Continuous, f64::NEG_INFINITY, f64::INFINITY);
        m.add_constraint("r", vec![(x, 1.0), (z, -0.5)], Sense::Le, 0.25);
        m.add_constraint("s", vec![(f, 1.0), (x, -1.0)], Sense::Eq, 0.0);
        m.set_objective(true, vec![(f, 1.0)], 0.0);
        m
    }

    #[test]
    fn mps_layout() {
        let s = write_mps(&tiny(), "t");
        assert!(s.contains(" L  r\n E  s\n"));
        assert!(s.contains("    x_0_0  r  1\n    x_0_0  s  -1\n"));
        assert!(s.contains(" LO BND  x_0_0  -1\n UP BND  x_0_0  2.5\n LO BND  z_1_0_0  0\n UP BND  z_1_0_0  1\n FR BND  y_1_0\n"));
        assert!(s.contains("    RHS  r  0.25\n"));
        assert!(s.contains("    M0  'MARKER'  'INTORG'\n    z_1_0_0  r  -0.5\n    M0  'MARKER'  'INTEND'\n"));
        assert_eq!(s, write_mps(&tiny(), "t"));
    }

    #[test]
    fn lp_layout() {
        let s = write_lp(&tiny(), "t");
        assert!(s.contains(" r: 1 x_0_0 - 0.5 z_1_0_0 <= 0.25\n"));
        assert!(s.contains(" y_1_0 free\n"));
        assert!(s.contains("Binaries\n z_1_0_0\nEnd\n"));
    }
}
