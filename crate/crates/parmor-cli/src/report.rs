//! CSV and metadata emission.
//!
//! Every data file is a comma-separated table with a header line, `.`
//! decimal separator, and 16-significant-digit scientific notation, so
//! fixed-seed reruns are byte-identical. Each CSV gets a sidecar
//! `<name>.meta.toml` echoing the configuration, the library version, and
//! run notes; wall-clock times live only in the sidecar, keeping the data
//! files free of nondeterminism.

use std::path::{Path, PathBuf};
use std::time::Instant;

use parmor::{Error, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

/// Scientific notation with 16 significant digits; `NaN` marks a method
/// failure recorded by the NaN-and-continue policy.
pub fn sci(x: f64) -> String {
    format!("{x:.15e}")
}

/// Writes one CSV file; `rows` are preformatted comma-joined lines.
pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut text = String::with_capacity(rows.len() * 64 + header.len() + 1);
    text.push_str(header);
    text.push('\n');
    for row in rows {
        text.push_str(row);
        text.push('\n');
    }
    std::fs::write(path, text)?;
    Ok(())
}

/// One figure-shape expectation, reported pass/warn instead of failing the
/// run: the finite-difference desk model differs from any particular
/// reference discretization, so orderings may flip at isolated points.
#[derive(Debug, Clone, Serialize)]
pub struct SoftCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Collects soft checks and run notes for the sidecars.
#[derive(Debug, Default)]
pub struct RunLog {
    pub notes: Vec<String>,
    pub soft_checks: Vec<SoftCheck>,
}

impl RunLog {
    pub fn note(&mut self, text: impl Into<String>) {
        let text = text.into();
        log::info!("{text}");
        self.notes.push(text);
    }

    pub fn soft_check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        let detail = detail.into();
        if passed {
            log::info!("soft check {name}: pass ({detail})");
        } else {
            log::warn!("soft check {name}: WARN ({detail})");
        }
        self.soft_checks.push(SoftCheck {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    /// Failed soft checks, formatted for the exit-code-2 report.
    pub fn warnings(&self) -> Vec<String> {
        self.soft_checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("{}: {}", c.name, c.detail))
            .collect()
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    experiment: &'a str,
    library_version: &'a str,
    wall_seconds: f64,
    notes: &'a [String],
    soft_checks: &'a [SoftCheck],
    config: &'a ExperimentConfig,
}

/// Writes `<csv path with .meta.toml>` for one emitted CSV.
pub fn write_sidecar(
    csv_path: &Path,
    experiment: &str,
    cfg: &ExperimentConfig,
    log: &RunLog,
    started: Instant,
) -> Result<PathBuf> {
    let side = Sidecar {
        experiment,
        library_version: env!("CARGO_PKG_VERSION"),
        wall_seconds: started.elapsed().as_secs_f64(),
        notes: &log.notes,
        soft_checks: &log.soft_checks,
        config: cfg,
    };
    let text = toml::to_string_pretty(&side)
        .map_err(|e| Error::invalid(format!("sidecar serialization failed: {e}")))?;
    let path = csv_path.with_extension("meta.toml");
    std::fs::write(&path, text)?;
    Ok(path)
}
