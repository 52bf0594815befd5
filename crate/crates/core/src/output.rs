//! Plain-text output formats: trajectory CSV, analysis CSVs, and operator snapshot headers.
//!
//! Every CSV starts with `#` comment lines followed by one column-name line.
//! Floats are written in shortest round-trip form, so files re-parse bit-exactly.

use std::io::{self, Write};

use thiserror::Error;

use crate::analytics::{BoundReport, Distributions};
use crate::propagation::TrajectoryRecord;

pub const VERSION: &str = concat!("pauliprop ", env!("CARGO_PKG_VERSION"));

pub const TRAJECTORY_COLUMNS: &str = "step,time,value,terms,discarded_mass,norm_ratio";
pub const TRAJECTORY_OSE_COLUMNS: &str = "ose_half,ose_shannon";
pub const OSE_COLUMNS: &str = "time,alpha,value";
pub const HISTOGRAM_COLUMNS: &str = "bucket_lo,bucket_hi,mass";
pub const WEIGHT_COLUMNS: &str = "weight,mass";
pub const REFERENCE_COLUMNS: &str = "step,time,value";
pub const GROWTH_COLUMNS: &str = "step,time,terms";
pub const BOUND_COLUMNS: &str =
    "time,alpha,K,ose,ln_tail,ln_delta_bound,error_exact,error_bound,epsilon,K_required";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("missing column header")]
    MissingHeader,
}

fn write_header(w: &mut impl Write, header: &[String], columns: &str) -> io::Result<()> {
    for h in header {
        writeln!(w, "# {h}")?;
    }
    writeln!(w, "{columns}")
}

/// Writes the trajectory table; OSE columns appear only when `with_ose` is set.
pub fn write_trajectory_csv(
    w: &mut impl Write,
    header: &[String],
    records: &[TrajectoryRecord],
    with_ose: bool,
) -> io::Result<()> {
    let columns = if with_ose {
        format!("{TRAJECTORY_COLUMNS},{TRAJECTORY_OSE_COLUMNS}")
    } else {
        TRAJECTORY_COLUMNS.to_string()
    };
    write_header(w, header, &columns)?;
    for r in records {
        write!(
            w,
            "{},{},{},{},{},{}",
            r.step, r.time, r.value, r.terms, r.discarded_mass, r.norm_ratio
        )?;
        if with_ose {
            match r.ose {
                Some((half, shannon)) => write!(w, ",{half},{shannon}")?,
                None => write!(w, ",,")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a trajectory table written by [`write_trajectory_csv`].
pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectoryRecord>, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#') && !l.trim().is_empty());
    let (_, columns) = lines.next().ok_or(FormatError::MissingHeader)?;
    let with_ose = match columns.trim() {
        c if c == TRAJECTORY_COLUMNS => false,
        c if c == format!("{TRAJECTORY_COLUMNS},{TRAJECTORY_OSE_COLUMNS}") => true,
        other => {
            return Err(FormatError::Parse {
                line: 0,
                msg: format!("unexpected columns {other:?}"),
            });
        }
    };
    let mut out = Vec::new();
    for (idx, line) in lines {
        let err = |msg: String| FormatError::Parse { line: idx + 1, msg };
        let fields: Vec<&str> = line.trim().split(',').collect();
        let expected = if with_ose { 8 } else { 6 };
        if fields.len() != expected {
            return Err(err(format!(
                "expected {expected} fields, got {}",
                fields.len()
            )));
        }
        let float = |i: usize| {
            fields[i]
                .parse::<f64>()
                .map_err(|_| err(format!("bad number {:?}", fields[i])))
        };
        let int = |i: usize| {
            fields[i]
                .parse::<usize>()
                .map_err(|_| err(format!("bad integer {:?}", fields[i])))
        };
        let ose = if with_ose && !fields[6].is_empty() {
            Some((float(6)?, float(7)?))
        } else {
            None
        };
        out.push(TrajectoryRecord {
            step: int(0)?,
            time: float(1)?,
            value: float(2)?,
            terms: int(3)?,
            discarded_mass: float(4)?,
            norm_ratio: float(5)?,
            ose,
        });
    }
    Ok(out)
}

/// Rows of `(time, alpha, value)`.
pub fn write_ose_csv(
    w: &mut impl Write,
    header: &[String],
    rows: &[(f64, f64, f64)],
) -> io::Result<()> {
    write_header(w, header, OSE_COLUMNS)?;
    for (t, a, v) in rows {
        writeln!(w, "{t},{a},{v}")?;
    }
    Ok(())
}

pub fn write_histogram_csv(
    w: &mut impl Write,
    header: &[String],
    d: &Distributions,
) -> io::Result<()> {
    write_header(w, header, HISTOGRAM_COLUMNS)?;
    for b in &d.coefficients {
        writeln!(w, "{},{},{}", b.lo, b.hi, b.mass)?;
    }
    Ok(())
}

pub fn write_weight_csv(
    w: &mut impl Write,
    header: &[String],
    d: &Distributions,
) -> io::Result<()> {
    write_header(w, header, WEIGHT_COLUMNS)?;
    for (weight, mass) in &d.weights {
        writeln!(w, "{weight},{mass}")?;
    }
    Ok(())
}

/// Rows of `(step, time, value)` from an independent reference calculation.
pub fn write_reference_csv(
    w: &mut impl Write,
    header: &[String],
    rows: &[(usize, f64, f64)],
) -> io::Result<()> {
    write_header(w, header, REFERENCE_COLUMNS)?;
    for (s, t, v) in rows {
        writeln!(w, "{s},{t},{v}")?;
    }
    Ok(())
}

/// Rows of `(step, time, terms)`.
pub fn write_growth_csv(
    w: &mut impl Write,
    header: &[String],
    rows: &[(usize, f64, usize)],
) -> io::Result<()> {
    write_header(w, header, GROWTH_COLUMNS)?;
    for (s, t, n) in rows {
        writeln!(w, "{s},{t},{n}")?;
    }
    Ok(())
}

/// One analysed `(operator, α, K)` point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub time: f64,
    pub report: BoundReport,
    pub ln_tail: f64,
    pub error_exact: f64,
    pub error_bound: f64,
}

pub fn write_bound_csv(w: &mut impl Write, header: &[String], rows: &[BoundRow]) -> io::Result<()> {
    write_header(w, header, BOUND_COLUMNS)?;
    for row in rows {
        let r = &row.report;
        let eps = r.epsilon.map(|e| e.to_string()).unwrap_or_default();
        let k_req = r.k_required.map(|k| k.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{eps},{k_req}",
            row.time,
            r.alpha,
            r.k,
            r.entropy,
            row.ln_tail,
            r.ln_delta_bound,
            row.error_exact,
            row.error_bound
        )?;
    }
    Ok(())
}

/// Value of a `# key = value` comment line, if present.
pub fn header_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines()
        .map_while(|l| l.trim_start().strip_prefix('#'))
        .filter_map(|l| l.split_once('='))
        .find(|(k, _)| k.trim() == key)
        .map(|(_, v)| v.trim())
}
