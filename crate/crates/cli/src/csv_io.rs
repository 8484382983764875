//! CSV readers and writers for energy traces and sweep summaries.
//!
//! Floats are written in scientific notation with 17 significant digits,
//! which round-trips every f64 bit pattern exactly. The reader reports the
//! file and line of the first malformed cell.

use std::path::Path;

use pwave_core::energy::{EnergyTrace, TraceSample};

use crate::CliError;

pub const TRACE_HEADER: &str = "t,E,D,L,residual";

pub const SUMMARY_HEADER: &str =
    "run,p,m,gamma,fitted_slope,r_squared,envelope_ratio,outside_theory,status";

/// Shortest representation that parses back to the same f64.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trace_to_string(trace: &EnergyTrace) -> String {
    let mut out = String::with_capacity(96 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for s in trace.samples() {
        out.push_str(&format_f64(s.t));
        out.push(',');
        out.push_str(&format_f64(s.e));
        out.push(',');
        out.push_str(&format_f64(s.d));
        out.push(',');
        out.push_str(&format_f64(s.l));
        out.push(',');
        out.push_str(&format_f64(s.residual));
        out.push('\n');
    }
    out
}

pub fn write_trace(path: &Path, trace: &EnergyTrace) -> Result<(), CliError> {
    std::fs::write(path, trace_to_string(trace))
        .map_err(|e| CliError::Io { path: path.into(), source: e })
}

pub fn read_trace(path: &Path) -> Result<EnergyTrace, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io { path: path.into(), source: e })?;
    parse_trace(path, &text)
}

pub fn parse_trace(path: &Path, text: &str) -> Result<EnergyTrace, CliError> {
    let bad = |line: usize, msg: String| {
        CliError::Config(format!("{}:{line}: {msg}", path.display()))
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == TRACE_HEADER => {}
        Some((_, header)) => {
            return Err(bad(1, format!("expected header {TRACE_HEADER:?}, got {header:?}")))
        }
        None => return Err(bad(1, "empty file".into())),
    }

    let mut samples = Vec::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = raw.split(',').collect();
        if cells.len() != 5 {
            return Err(bad(line, format!("expected 5 columns, got {}", cells.len())));
        }
        let parse = |i: usize, name: &str| -> Result<f64, CliError> {
            cells[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(line, format!("bad {name} value {:?}", cells[i])))
        };
        samples.push(TraceSample {
            t: parse(0, "t")?,
            e: parse(1, "E")?,
            d: parse(2, "D")?,
            l: parse(3, "L")?,
            residual: parse(4, "residual")?,
        });
    }
    EnergyTrace::from_samples(samples)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// One row of a sweep's summary.csv.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub run: String,
    pub p: f64,
    pub m: f64,
    pub gamma: f64,
    pub fitted_slope: Option<f64>,
    pub r_squared: Option<f64>,
    pub envelope_ratio: Option<f64>,
    pub outside_theory: bool,
    pub status: String,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(format_f64).unwrap_or_default()
}

pub fn summary_to_string(rows: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(SUMMARY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            csv_field(&r.run),
            format_f64(r.p),
            format_f64(r.m),
            format_f64(r.gamma),
            opt_f64(r.fitted_slope),
            opt_f64(r.r_squared),
            opt_f64(r.envelope_ratio),
            r.outside_theory,
            csv_field(&r.status),
        ));
    }
    out
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<(), CliError> {
    std::fs::write(path, summary_to_string(rows))
        .map_err(|e| CliError::Io { path: path.into(), source: e })
}
