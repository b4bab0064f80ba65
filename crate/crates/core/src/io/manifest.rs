use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::clustering::StopReason;
use crate::error::{Error, Result};
use crate::types::CurveSet;

/// Identity of a data set: shape plus a SHA-256 of the grid and values as
/// little-endian IEEE-754 bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub rows: usize,
    pub cols: usize,
    pub sha256: String,
}

pub fn fingerprint(set: &CurveSet) -> DatasetFingerprint {
    let mut h = Sha256::new();
    for v in set.grid().points().iter().chain(set.values()) {
        h.update(v.to_le_bytes());
    }
    let mut hex = String::with_capacity(64);
    for b in h.finalize().iter() {
        let _ = write!(hex, "{b:02x}");
    }
    DatasetFingerprint {
        rows: set.len(),
        cols: set.width(),
        sha256: hex,
    }
}

/// Record of one clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub command: String,
    /// Every option the run was started with.
    pub config: serde_json::Value,
    pub dataset: DatasetFingerprint,
    pub seed: u64,
    pub trace: Vec<f64>,
    pub final_error: f64,
    pub relative_error: Option<f64>,
    pub allocation: Vec<usize>,
    pub iterations: usize,
    pub stop: Option<StopReason>,
    pub wall_time_seconds: f64,
    /// Command-specific results, such as per-seed errors.
    #[serde(default)]
    pub details: serde_json::Value,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_slice(&fs::read(path)?)?)
    }
}

/// Writes `path` through a temporary file in the same directory and a
/// rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// One line of a run comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub run: String,
    pub command: String,
    pub mode: Option<String>,
    pub k: Option<u64>,
    pub p: Option<u64>,
    pub seed: u64,
    pub final_error: f64,
    pub relative_error: Option<f64>,
    pub allocation: Vec<usize>,
    pub iterations: usize,
    pub wall_time_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
    /// Notes about runs on different data.
    pub warnings: Vec<String>,
}

fn config_u64(config: &serde_json::Value, key: &str) -> Option<u64> {
    config.get(key).and_then(serde_json::Value::as_u64)
}

/// Tabulates manifests in the order given.
pub fn build_report(runs: &[(String, RunManifest)]) -> Result<Report> {
    let Some((first_name, first)) = runs.first() else {
        return Err(Error::config("a report needs at least one manifest"));
    };
    let warnings = runs
        .iter()
        .skip(1)
        .filter(|(_, m)| m.dataset != first.dataset)
        .map(|(name, _)| format!("{name} was run on different data than {first_name}"))
        .collect();
    let rows = runs
        .iter()
        .map(|(name, m)| ReportRow {
            run: name.clone(),
            command: m.command.clone(),
            mode: m.config.get("mode").and_then(|v| v.as_str()).map(str::to_string),
            k: config_u64(&m.config, "k"),
            p: config_u64(&m.config, "p"),
            seed: m.seed,
            final_error: m.final_error,
            relative_error: m.relative_error,
            allocation: m.allocation.clone(),
            iterations: m.iterations,
            wall_time_seconds: m.wall_time_seconds,
        })
        .collect();
    Ok(Report { rows, warnings })
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(String::new, T::to_string)
}

fn allocation_text(a: &[usize]) -> String {
    a.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

impl Report {
    pub const COLUMNS: [&'static str; 11] = [
        "run",
        "command",
        "mode",
        "k",
        "p",
        "seed",
        "final_error",
        "relative_error",
        "allocation",
        "iterations",
        "wall_time_seconds",
    ];

    fn cells(row: &ReportRow) -> [String; 11] {
        [
            row.run.clone(),
            row.command.clone(),
            opt(&row.mode),
            opt(&row.k),
            opt(&row.p),
            row.seed.to_string(),
            super::format_real(row.final_error),
            row.relative_error.map_or_else(String::new, super::format_real),
            allocation_text(&row.allocation),
            row.iterations.to_string(),
            format!("{:.3}", row.wall_time_seconds),
        ]
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e.to_string()));
        w.write_record(Self::COLUMNS).map_err(io)?;
        for row in &self.rows {
            w.write_record(Self::cells(row)).map_err(io)?;
        }
        w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }

    /// Aligned plain-text table, warnings last.
    pub fn to_text(&self) -> String {
        let header = ["run", "mode", "K", "P", "E", "relative", "allocation", "iter", "time (s)"];
        let lines: Vec<[String; 9]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.run.clone(),
                    r.mode.clone().unwrap_or_else(|| r.command.clone()),
                    opt(&r.k),
                    opt(&r.p),
                    format!("{:.6}", r.final_error),
                    r.relative_error.map_or_else(String::new, |v| format!("{v:.4}")),
                    allocation_text(&r.allocation),
                    r.iterations.to_string(),
                    format!("{:.3}", r.wall_time_seconds),
                ]
            })
            .collect();
        let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
        for l in &lines {
            for (w, c) in width.iter_mut().zip(l) {
                *w = (*w).max(c.len());
            }
        }
        let mut out = String::new();
        let row = |out: &mut String, cells: &[String]| {
            let padded: Vec<String> = cells
                .iter()
                .zip(&width)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect();
            out.push_str(padded.join("  ").trim_end());
            out.push('\n');
        };
        row(&mut out, &header.map(String::from));
        for l in &lines {
            row(&mut out, l);
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        out
    }
}
