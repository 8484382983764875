//! JSON artifacts written next to each run's trace.
//!
//! Every artifact carries a schema_version so downstream tooling can detect
//! layout changes. File references inside a run record are names relative
//! to the run directory, which keeps records valid when the directory moves.

use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::path::Path;

use pwave_core::constraints::ConstraintReport;
use pwave_core::envelope::FittedEnvelope;
use pwave_core::inequalities::EmbeddingReport;
use pwave_core::komornik::KomornikReport;
use serde::Serialize;

use crate::CliError;

pub const SCHEMA_VERSION: &str = "1";

/// Top-level record tying together everything one run produced.
#[derive(Debug, Serialize)]
pub struct RunRecord {
    pub schema_version: &'static str,
    pub label: String,
    /// Key=value snapshot of the effective configuration.
    pub config: BTreeMap<String, String>,
    pub trace_csv: String,
    pub reports: Vec<String>,
    pub plots: Vec<String>,
    pub duration_seconds: f64,
    /// Analysis conditions that did not hold; empty on success.
    pub failures: Vec<String>,
}

impl RunRecord {
    /// Fails if any referenced file is missing from `dir`; the record is
    /// only written after everything it names is on disk.
    pub fn verify_references(&self, dir: &Path) -> Result<(), CliError> {
        let names = std::iter::once(&self.trace_csv)
            .chain(self.reports.iter())
            .chain(self.plots.iter());
        for name in names {
            let path = dir.join(name);
            if !path.is_file() {
                return Err(CliError::Io {
                    path,
                    source: std::io::Error::new(ErrorKind::NotFound, "referenced file missing"),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Serialize)]
pub struct EnvelopeArtifact {
    pub schema_version: &'static str,
    pub fit: FittedEnvelope,
    /// max E/bound over the fit window; at most 1 + 1e-6 when the envelope
    /// dominates.
    pub ratio: f64,
}

#[derive(Debug, Serialize)]
pub struct KomornikArtifact {
    pub schema_version: &'static str,
    pub estimate: KomornikReport,
}

#[derive(Debug, Serialize)]
pub struct EmbeddingArtifact {
    pub schema_version: &'static str,
    pub checked_states: usize,
    pub worst_margin: f64,
    pub violations: usize,
    pub reports: Vec<EmbeddingReport>,
}

#[derive(Debug, Serialize)]
pub struct ConstraintArtifact {
    pub schema_version: &'static str,
    pub report: ConstraintReport,
    pub m_ok: bool,
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io {
        path: path.into(),
        source: std::io::Error::new(ErrorKind::InvalidData, e),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io { path: path.into(), source: e })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record() -> RunRecord {
        RunRecord {
            schema_version: SCHEMA_VERSION,
            label: "demo".into(),
            config: BTreeMap::from([("solver.p".to_string(), "2".to_string())]),
            trace_csv: "trace.csv".into(),
            reports: vec!["envelope.json".into()],
            plots: vec![],
            duration_seconds: 0.25,
            failures: vec![],
        }
    }

    #[test]
    fn json_round_trips_with_trailing_newline() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        write_json(&path, &record()).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.ends_with("}\n"));
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["schema_version"], "1");
        assert_eq!(value["config"]["solver.p"], "2");
    }

    #[test]
    fn reference_check_requires_files_on_disk() {
        let dir = tempfile::tempdir().unwrap();
        let rec = record();
        let err = rec.verify_references(dir.path()).unwrap_err();
        assert!(err.to_string().contains("trace.csv"), "{err}");

        std::fs::write(dir.path().join("trace.csv"), "x").unwrap();
        let err = rec.verify_references(dir.path()).unwrap_err();
        assert!(err.to_string().contains("envelope.json"), "{err}");

        std::fs::write(dir.path().join("envelope.json"), "{}").unwrap();
        rec.verify_references(dir.path()).unwrap();
    }
}
