//! MPS file writer.
//!
//! Emits the classic sectioned layout (`NAME`, `ROWS`, `COLUMNS` with
//! `'INTORG'`/`'INTEND'` markers around integer runs, `RHS`, `BOUNDS`,
//! `ENDATA`) in registration order, so identical models produce
//! byte-identical files. Names longer than the historical 8-character limit
//! are kept as-is; every current solver reads the whitespace-delimited
//! variant. Maximization models carry an `OBJSENSE` section.

use crate::model::{Direction, MipModel, Sense, VarKind};
use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

/// Objective row name used in every emitted file.
pub const OBJECTIVE_ROW: &str = "OBJ";

/// Renders the model as MPS text.
pub fn write_mps(model: &MipModel) -> String {
    let mut out = String::with_capacity(4096);
    let name = if model.name().is_empty() {
        "MODEL"
    } else {
        model.name()
    };
    out.push_str(&format!("NAME          {}\n", name));
    if model.direction() == Direction::Maximize {
        out.push_str("OBJSENSE\n    MAX\n");
    }

    out.push_str("ROWS\n");
    out.push_str(&format!(" N  {}\n", OBJECTIVE_ROW));
    for c in model.constraints() {
        let tag = match c.sense {
            Sense::Le => "L",
            Sense::Ge => "G",
            Sense::Eq => "E",
        };
        out.push_str(&format!(" {}  {}\n", tag, c.name));
    }

    // Column-major incidence, rows in registration order per column.
    let n = model.num_vars();
    let mut col_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (ci, c) in model.constraints().iter().enumerate() {
        for &(coef, var) in &c.terms {
            col_entries[var.index()].push((ci, coef));
        }
    }

    out.push_str("COLUMNS\n");
    let mut in_int_block = false;
    for v in model.variables() {
        let is_int = v.kind == VarKind::Binary;
        if is_int && !in_int_block {
            out.push_str("    MARKER                 'MARKER'                 'INTORG'\n");
            in_int_block = true;
        } else if !is_int && in_int_block {
            out.push_str("    MARKER                 'MARKER'                 'INTEND'\n");
            in_int_block = false;
        }
        let obj_coef = model.objective()[v.id.index()];
        let mut wrote_any = false;
        if obj_coef != 0.0 {
            push_entry(&mut out, &v.name, OBJECTIVE_ROW, obj_coef);
            wrote_any = true;
        }
        for &(ci, coef) in &col_entries[v.id.index()] {
            push_entry(&mut out, &v.name, &model.constraints()[ci].name, coef);
            wrote_any = true;
        }
        if !wrote_any {
            // Columns absent from every row would otherwise not exist for the reader.
            push_entry(&mut out, &v.name, OBJECTIVE_ROW, 0.0);
        }
    }
    if in_int_block {
        out.push_str("    MARKER                 'MARKER'                 'INTEND'\n");
    }

    out.push_str("RHS\n");
    for c in model.constraints() {
        if c.rhs != 0.0 {
            push_entry(&mut out, "RHS", &c.name, c.rhs);
        }
    }
    // MPS convention: an RHS on the objective row is the negated constant offset.
    if model.objective_constant() != 0.0 {
        push_entry(&mut out, "RHS", OBJECTIVE_ROW, -model.objective_constant());
    }

    out.push_str("BOUNDS\n");
    for v in model.variables() {
        match v.kind {
            VarKind::Binary => {
                out.push_str(&format!(" BV BND       {}\n", v.name));
            }
            VarKind::Continuous => {
                let lo_finite = v.lower.is_finite();
                let up_finite = v.upper.is_finite();
                if lo_finite && up_finite && v.lower == v.upper {
                    out.push_str(&format!(
                        " FX BND       {}  {}\n",
                        v.name,
                        fmt_num(v.lower)
                    ));
                    continue;
                }
                match (lo_finite, up_finite) {
                    (false, false) => out.push_str(&format!(" FR BND       {}\n", v.name)),
                    (true, false) => out.push_str(&format!(
                        " LO BND       {}  {}\n",
                        v.name,
                        fmt_num(v.lower)
                    )),
                    (false, true) => {
                        out.push_str(&format!(" MI BND       {}\n", v.name));
                        out.push_str(&format!(
                            " UP BND       {}  {}\n",
                            v.name,
                            fmt_num(v.upper)
                        ));
                    }
                    (true, true) => {
                        out.push_str(&format!(
                            " LO BND       {}  {}\n",
                            v.name,
                            fmt_num(v.lower)
                        ));
                        out.push_str(&format!(
                            " UP BND       {}  {}\n",
                            v.name,
                            fmt_num(v.upper)
                        ));
                    }
                }
            }
        }
    }
    out.push_str("ENDATA\n");
    out
}

/// Writes MPS text to a file; gzip-compressed when the path ends in `.gz`.
pub fn write_mps_file(model: &MipModel, path: impl AsRef<Path>) -> io::Result<()> {
    let path = path.as_ref();
    let text = write_mps(model);
    if path.extension().map(|e| e == "gz").unwrap_or(false) {
        let file = File::create(path)?;
        let mut enc = flate2::write::GzEncoder::new(file, flate2::Compression::default());
        enc.write_all(text.as_bytes())?;
        enc.finish()?;
    } else {
        std::fs::write(path, text)?;
    }
    Ok(())
}

fn push_entry(out: &mut String, col: &str, row: &str, value: f64) {
    out.push_str(&format!(
        "    {:<10}{:<10}{}\n",
        col,
        row,
        fmt_num(value)
    ));
}

fn fmt_num(x: f64) -> String {
    // Display prints the shortest decimal string that round-trips, which keeps
    // output deterministic and exact without scientific notation.
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{}", x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Direction, MipModel, Sense, VarKind};

    fn knapsack() -> MipModel {
        let mut m = MipModel::new("KNAP", Direction::Maximize);
        let x = m.add_variable(VarKind::Binary, 0.0, 1.0, "x").unwrap();
        m.add_objective_term(x, 1.0).unwrap();
        m.add_constraint(&[(1.0, x)], Sense::Le, 1.0, "cap").unwrap();
        m
    }

    #[test]
    fn sections_and_markers_present() {
        let text = write_mps(&knapsack());
        for needle in [
            "NAME", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA", "MARKER", "'INTORG'",
            "'INTEND'", " BV BND",
        ] {
            assert!(text.contains(needle), "missing {needle} in:\n{text}");
        }
        assert!(text.contains("OBJSENSE"));
    }

    #[test]
    fn deterministic_output() {
        let a = write_mps(&knapsack());
        let b = write_mps(&knapsack());
        assert_eq!(a, b);
    }

    #[test]
    fn empty_constraint_model_is_valid() {
        let mut m = MipModel::new("EMPTY", Direction::Minimize);
        m.add_variable(VarKind::Continuous, 0.0, 1.0, "x").unwrap();
        let text = write_mps(&m);
        assert!(text.contains("ENDATA"));
        // The unused column still appears so readers register it.
        assert!(text.contains("x"));
    }

    #[test]
    fn gzip_roundtrip() {
        use std::io::Read;
        let m = knapsack();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mps.gz");
        write_mps_file(&m, &path).unwrap();
        let mut dec = flate2::read::GzDecoder::new(File::open(&path).unwrap());
        let mut text = String::new();
        dec.read_to_string(&mut text).unwrap();
        assert_eq!(text, write_mps(&m));
    }
}
