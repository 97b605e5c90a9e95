//! Text formats shared with downstream tooling: the sweep, summary and
//! diagnostics CSVs and the per-snapshot field files.
//!
//! Numbers are written with 17 significant digits in `.`-decimal scientific
//! notation, which round-trips every `f64` exactly.

use crate::dynamics::{DiagnosticsRecord, SimState};
use crate::error::{Error, Result};
use crate::experiments::SweepResult;
use crate::mesh::{Field, Grid};
use std::io::Write;

pub const SWEEP_HEADER: &str = "lambda,t,err_u_linf,err_u_l2,err_v_linf,err_v_l2";
pub const SUMMARY_HEADER: &str = "lambda,E_u,E_v,runtime_seconds";
pub const DIAGNOSTICS_HEADER: &str = "t,mass,min_v,max_u,w1q_v,lyapunov";

/// `x` with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows<W: Write>(mut w: W, header: &str, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    writeln!(w, "{header}")?;
    for row in rows {
        let line: Vec<String> = row.into_iter().map(fmt_f64).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv<W: Write>(w: W, res: &SweepResult) -> Result<()> {
    let rows = res
        .rows
        .iter()
        .map(|r| vec![r.lambda, r.t, r.err_u_linf, r.err_u_l2, r.err_v_linf, r.err_v_l2]);
    write_rows(w, SWEEP_HEADER, rows)
}

pub fn write_summary_csv<W: Write>(w: W, res: &SweepResult) -> Result<()> {
    let rows = res
        .summary
        .iter()
        .map(|s| vec![s.lambda, s.e_u, s.e_v, s.runtime_seconds]);
    write_rows(w, SUMMARY_HEADER, rows)
}

pub fn write_diagnostics_csv<W: Write>(w: W, records: &[DiagnosticsRecord]) -> Result<()> {
    let rows = records
        .iter()
        .map(|d| vec![d.t, d.mass, d.min_v, d.max_u, d.w1q_v, d.lyapunov]);
    write_rows(w, DIAGNOSTICS_HEADER, rows)
}

/// Parses CSV text whose first line must equal `header` exactly and whose
/// rows hold one finite or infinite decimal number per column.
pub fn read_csv_strict(text: &str, header: &str) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    let first = lines.next().ok_or_else(|| Error::Parse("empty csv".into()))?;
    if first != header {
        return Err(Error::Parse(format!(
            "header mismatch: expected \"{header}\", found \"{first}\""
        )));
    }
    let cols = header.split(',').count();
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != cols {
                return Err(Error::Parse(format!(
                    "line {}: expected {cols} fields, found {}",
                    i + 2,
                    fields.len()
                )));
            }
            fields
                .iter()
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| Error::Parse(format!("line {}: not a number: \"{f}\"", i + 2)))
                })
                .collect()
        })
        .collect()
}

/// Writes a snapshot: a header with the time, the active cell counts and
/// spacings, then `field u` and `field v` sections with one value per line
/// in row-major order.
pub fn write_snapshot<W: Write>(mut w: W, state: &SimState) -> Result<()> {
    let g = state.u.grid();
    let join = |xs: Vec<String>| xs.join(" ");
    writeln!(w, "t: {}", fmt_f64(state.t))?;
    writeln!(
        w,
        "dims: {}",
        join(g.cell_counts().iter().map(|n| n.to_string()).collect())
    )?;
    writeln!(
        w,
        "spacing: {}",
        join(g.spacing().iter().map(|h| fmt_f64(*h)).collect())
    )?;
    for (name, f) in [("u", &state.u), ("v", &state.v)] {
        writeln!(w, "field {name}")?;
        for x in f.values() {
            writeln!(w, "{}", fmt_f64(*x))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Parses a file written by [`write_snapshot`]. The grid is rebuilt from the
/// cell counts and spacings; the step index is not stored and comes back 0.
pub fn read_snapshot(text: &str) -> Result<SimState> {
    let mut lines = text.lines();
    let mut header = |key: &str| -> Result<String> {
        let line = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing \"{key}\" line")))?;
        line.strip_prefix(&format!("{key}: "))
            .map(str::to_string)
            .ok_or_else(|| Error::Parse(format!("expected \"{key}: ...\", found \"{line}\"")))
    };
    let num = |s: &str| {
        s.parse::<f64>()
            .map_err(|_| Error::Parse(format!("not a number: \"{s}\"")))
    };
    let t = num(&header("t")?)?;
    let dims: Vec<usize> = header("dims")?
        .split_whitespace()
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad cell count \"{s}\""))))
        .collect::<Result<_>>()?;
    let spacing: Vec<f64> = header("spacing")?.split_whitespace().map(num).collect::<Result<_>>()?;
    if dims.len() != spacing.len() || dims.is_empty() {
        return Err(Error::Parse("dims and spacing disagree".into()));
    }
    let extents: Vec<f64> = dims.iter().zip(&spacing).map(|(n, h)| *n as f64 * h).collect();
    let grid = Grid::new(dims.len(), &extents, &dims)?;

    let mut read_field = |name: &str| -> Result<Field> {
        let tag = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing field {name}")))?;
        if tag != format!("field {name}") {
            return Err(Error::Parse(format!("expected \"field {name}\", found \"{tag}\"")));
        }
        let vals = (0..grid.len())
            .map(|i| {
                let line = lines
                    .next()
                    .ok_or_else(|| Error::Parse(format!("field {name} truncated after {i} values")))?;
                num(line)
            })
            .collect::<Result<Vec<f64>>>()?;
        Field::new(grid, vals)
    };
    let u = read_field("u")?;
    let v = read_field("v")?;
    if let Some(extra) = lines.find(|l| !l.trim().is_empty()) {
        return Err(Error::Parse(format!("trailing content \"{extra}\"")));
    }
    Ok(SimState { u, v, t, step: 0 })
}
