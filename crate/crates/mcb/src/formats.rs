//! File formats: CSV for boundary tables and curves, JSON for reports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! emitted files re-parse to bit-identical values.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::Serialize;

use mcb_core::buckets::{star_rating, CLASSICAL_THRESHOLDS};
use mcb_core::simctest::{BoundaryTable, Spending};
use mcb_core::{BucketSet, RatingCode};

use crate::error::McbError;

/// Streams `n,lower,upper,eps,spent_lower,spent_upper` rows without
/// materializing the table.
pub fn write_boundary_csv(
    w: &mut dyn Write,
    threshold: f64,
    spending: Spending,
    n_max: u64,
) -> Result<(), McbError> {
    writeln!(w, "n,lower,upper,eps,spent_lower,spent_upper")
        .map_err(|e| McbError::io("<output>", e))?;
    let mut io_err = None;
    BoundaryTable::for_each_row(threshold, spending, n_max, |row| {
        if io_err.is_none() {
            if let Err(e) = writeln!(
                w,
                "{},{},{},{},{},{}",
                row.n, row.lower, row.upper, row.eps, row.spent_lower, row.spent_upper
            ) {
                io_err = Some(e);
            }
        }
    })?;
    match io_err {
        Some(e) => Err(McbError::io("<output>", e)),
        None => Ok(()),
    }
}

/// Reads rows written by [`write_boundary_csv`] back into a lookup-only
/// table. Only the first three columns are used; rows must be `n = 1, 2,
/// ...` in order.
pub fn read_boundary_csv(
    r: impl BufRead,
    threshold: f64,
    path: &Path,
) -> Result<BoundaryTable, McbError> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| McbError::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with('n')) {
            continue;
        }
        let mut fields = line.split(',');
        let parse = |s: Option<&str>, what: &str| -> Result<i64, McbError> {
            s.and_then(|v| v.trim().parse().ok()).ok_or_else(|| McbError::Malformed {
                path: path.into(),
                line: i + 1,
                msg: format!("missing or non-integer {what}"),
            })
        };
        let n = parse(fields.next(), "n")?;
        let lower = parse(fields.next(), "lower")?;
        let upper = parse(fields.next(), "upper")?;
        if n != rows.len() as i64 + 1 {
            return Err(McbError::Malformed {
                path: path.into(),
                line: i + 1,
                msg: format!("expected n = {}, found {n}", rows.len() + 1),
            });
        }
        rows.push((lower, upper));
    }
    Ok(BoundaryTable::from_rows(threshold, rows)?)
}

/// Reads a recorded Bernoulli stream: one `size,ones` pair per line.
pub fn read_stream_csv(r: impl BufRead, path: &Path) -> Result<Vec<(u64, u64)>, McbError> {
    let mut batches = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line.map_err(|e| McbError::io(path, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with('s')) {
            continue;
        }
        let mut fields = line.split(',');
        let mut parse = |what: &str| -> Result<u64, McbError> {
            fields.next().and_then(|v| v.trim().parse().ok()).ok_or_else(|| {
                McbError::Malformed {
                    path: path.into(),
                    line: i + 1,
                    msg: format!("missing or non-integer {what}"),
                }
            })
        };
        let size = parse("size")?;
        let ones = parse("ones")?;
        batches.push((size, ones));
    }
    Ok(batches)
}

/// One grid point of the effort curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EffortRow {
    pub p: f64,
    pub effort_rl: f64,
    pub effort_simctest: f64,
    pub lower_basic: f64,
    pub lower_improved: f64,
}

pub fn write_effort_csv(w: &mut dyn Write, rows: &[EffortRow]) -> Result<(), McbError> {
    let mut go = || -> std::io::Result<()> {
        writeln!(w, "p,effort_rl,effort_simctest,lower_basic,lower_improved")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{}",
                r.p, r.effort_rl, r.effort_simctest, r.lower_basic, r.lower_improved
            )?;
        }
        Ok(())
    };
    go().map_err(|e| McbError::io("<output>", e))
}

/// The distinct rating codes of a family, strongest first: plain star
/// counts descending, then straddling codes descending.
pub fn rating_columns(set: &BucketSet) -> Result<Vec<RatingCode>, McbError> {
    let mut codes: Vec<RatingCode> = set
        .buckets()
        .iter()
        .map(|b| star_rating(set, b, &CLASSICAL_THRESHOLDS))
        .collect::<Result<_, _>>()?;
    codes.sort_by_key(|c| (c.tilde, std::cmp::Reverse(c.stars)));
    codes.dedup();
    Ok(codes)
}

/// Decision-probability curve: one column per rating code (buckets
/// sharing a code pool their probability), plus the undecided residual.
pub fn write_probs_csv(
    w: &mut dyn Write,
    set: &BucketSet,
    rows: &[(f64, Vec<f64>, f64)],
) -> Result<(), McbError> {
    let codes = rating_columns(set)?;
    let per_bucket: Vec<RatingCode> = set
        .buckets()
        .iter()
        .map(|b| star_rating(set, b, &CLASSICAL_THRESHOLDS))
        .collect::<Result<_, _>>()?;
    let mut go = || -> std::io::Result<()> {
        write!(w, "p")?;
        for c in &codes {
            let label = if c.stars == 0 && !c.tilde { "none".into() } else { c.to_string() };
            write!(w, ",{label}")?;
        }
        writeln!(w, ",undecided")?;
        for (p, probs, undecided) in rows {
            debug_assert_eq!(probs.len(), per_bucket.len());
            write!(w, "{p}")?;
            for c in &codes {
                let mass: f64 = probs
                    .iter()
                    .zip(&per_bucket)
                    .filter(|&(_, bc)| bc == c)
                    .map(|(v, _)| v)
                    .sum();
                write!(w, ",{mass}")?;
            }
            writeln!(w, ",{undecided}")?;
        }
        Ok(())
    };
    go().map_err(|e| McbError::io("<output>", e))
}

/// One row of the integrated-effort table.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Table2Row {
    pub density: String,
    pub rl: f64,
    pub simctest: f64,
    pub lower_bound: f64,
}

pub fn write_table2_csv(w: &mut dyn Write, rows: &[Table2Row]) -> Result<(), McbError> {
    let mut go = || -> std::io::Result<()> {
        writeln!(w, "density,rl,simctest,lower_bound")?;
        for r in rows {
            writeln!(w, "{},{},{},{}", r.density, r.rl, r.simctest, r.lower_bound)?;
        }
        Ok(())
    };
    go().map_err(|e| McbError::io("<output>", e))
}

/// Pretty JSON plus a trailing newline.
pub fn write_json<T: Serialize>(w: &mut dyn Write, value: &T) -> Result<(), McbError> {
    serde_json::to_writer_pretty(&mut *w, value)?;
    writeln!(w).map_err(|e| McbError::io("<output>", e))
}
