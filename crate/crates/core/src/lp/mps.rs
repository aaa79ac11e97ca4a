//! Fixed-column MPS export, for cross-checking against external solvers.

use std::io::Write;

use super::{LpProblem, Sense};
use crate::error::Result;

fn row_name(i: usize) -> String {
    format!("R{i:07}")
}

fn col_name(j: usize) -> String {
    format!("C{j:07}")
}

/// Shortest representation that fits the 12-character numeric field.
fn num(v: f64) -> String {
    let plain = format!("{v}");
    if plain.len() <= 12 {
        return plain;
    }
    for prec in (0..=8).rev() {
        let s = format!("{v:.prec$e}");
        if s.len() <= 12 {
            return s;
        }
    }
    format!("{v:.0e}")
}

fn field_line(out: &mut impl Write, f1: &str, f2: &str, f3: &str, f4: &str) -> std::io::Result<()> {
    // Columns 2-3, 5-12, 15-22, 25-36.
    writeln!(out, " {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}")
}

pub fn write_mps(p: &LpProblem, name: &str, out: &mut impl Write) -> Result<()> {
    p.validate()?;
    writeln!(out, "NAME          {name}")?;
    writeln!(out, "ROWS")?;
    writeln!(out, " N  COST")?;
    for (i, s) in p.senses.iter().enumerate() {
        let tag = match s {
            Sense::Le => "L",
            Sense::Eq => "E",
            Sense::Ge => "G",
        };
        writeln!(out, " {tag:<2} {}", row_name(i))?;
    }
    writeln!(out, "COLUMNS")?;
    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); p.num_vars()];
    for &(r, c, a) in &p.entries {
        by_col[c].push((r, a));
    }
    for (j, col) in by_col.iter_mut().enumerate() {
        col.sort_by_key(|e| e.0);
        let name = col_name(j);
        if p.objective[j] != 0.0 || col.is_empty() {
            field_line(out, "", &name, "COST", &num(p.objective[j]))?;
        }
        // Merge duplicates so every (row, col) pair appears once.
        let mut k = 0;
        while k < col.len() {
            let r = col[k].0;
            let mut a = 0.0;
            while k < col.len() && col[k].0 == r {
                a += col[k].1;
                k += 1;
            }
            field_line(out, "", &name, &row_name(r), &num(a))?;
        }
    }
    writeln!(out, "RHS")?;
    for (i, &b) in p.rhs.iter().enumerate() {
        if b != 0.0 {
            field_line(out, "", "RHS", &row_name(i), &num(b))?;
        }
    }
    writeln!(out, "BOUNDS")?;
    for j in 0..p.num_vars() {
        let (l, u) = (p.lower[j], p.upper[j]);
        let name = col_name(j);
        match (l.is_finite(), u.is_finite()) {
            (true, true) if l == u => field_line(out, "FX", "BND", &name, &num(l))?,
            (false, false) => writeln!(out, " FR BND       {name}")?,
            (false, true) => {
                writeln!(out, " MI BND       {name}")?;
                field_line(out, "UP", "BND", &name, &num(u))?;
            }
            (true, up) => {
                if l != 0.0 {
                    field_line(out, "LO", "BND", &name, &num(l))?;
                }
                if up {
                    field_line(out, "UP", "BND", &name, &num(u))?;
                }
            }
        }
    }
    writeln!(out, "ENDATA")?;
    Ok(())
}
