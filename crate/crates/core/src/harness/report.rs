//! Report files: one CSV per (algorithm, metric) plus a manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::experiment::{ExperimentConfig, MetricsReport};
use crate::harness::metrics::tail_mean;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const TAIL_STEPS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: String,
    pub algorithm: String,
    pub reference_baseline: bool,
    pub diverged_runs: usize,
    pub mse_file: String,
    pub degree_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub library_version: String,
    pub config: ExperimentConfig,
    pub runs: usize,
    pub node_count: usize,
    pub algorithms: Vec<ManifestEntry>,
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

fn write_curve(path: &Path, header: &str, time: &[usize], values: &[f64]) -> Result<()> {
    let mut wr = csv::Writer::from_path(path)?;
    wr.write_record(["t", header])?;
    for (t, v) in time.iter().zip(values) {
        wr.write_record([t.to_string(), format!("{v:?}")])?;
    }
    wr.flush()?;
    Ok(())
}

/// Writes `mse_<label>.csv`, `degree_<label>.csv` and the manifest into `dir`.
pub fn write_report(dir: &Path, report: &MetricsReport, config: &ExperimentConfig) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(report.algorithms.len());
    for a in &report.algorithms {
        let stem = file_stem(&a.label);
        let mse_file = format!("mse_{stem}.csv");
        let degree_file = format!("degree_{stem}.csv");
        write_curve(&dir.join(&mse_file), "mse", &report.time, &a.mse)?;
        write_curve(&dir.join(&degree_file), "avg_degree", &report.time, &a.avg_degree)?;
        entries.push(ManifestEntry {
            label: a.label.clone(),
            algorithm: a.algorithm.clone(),
            reference_baseline: a.reference_baseline,
            diverged_runs: a.diverged_runs,
            mse_file,
            degree_file,
        });
    }
    let manifest = Manifest {
        library_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        runs: report.runs,
        node_count: report.node_count,
        algorithms: entries,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

fn read_curve(path: &Path) -> Result<Vec<f64>> {
    let mut rd = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (k, rec) in rd.records().enumerate() {
        let rec = rec?;
        let cell = rec.get(1).ok_or(Error::RaggedRow {
            row: k + 1,
            expected: 2,
            found: rec.len(),
        })?;
        // Diverged runs serialize as NaN or inf, which parse back.
        out.push(cell.parse().map_err(|_| Error::NonNumeric {
            row: k + 1,
            column: 1,
            value: cell.to_string(),
        })?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub label: String,
    pub algorithm: String,
    pub mean_mse: f64,
    pub tail_mse: f64,
    pub min_avg_degree: f64,
    pub max_avg_degree: f64,
    pub diverged_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub directory: PathBuf,
    pub runs: usize,
    pub tail_steps: usize,
    pub algorithms: Vec<AlgorithmSummary>,
}

/// Condenses each report directory into headline numbers.
pub fn summarize_reports(dirs: &[PathBuf]) -> Result<Vec<ReportSummary>> {
    let mut out = Vec::with_capacity(dirs.len());
    for dir in dirs {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
        let mut algorithms = Vec::with_capacity(manifest.algorithms.len());
        for e in &manifest.algorithms {
            let mse = read_curve(&dir.join(&e.mse_file))?;
            let deg = read_curve(&dir.join(&e.degree_file))?;
            if mse.is_empty() {
                return Err(Error::EmptyInput(format!("{} has no rows", e.mse_file)));
            }
            algorithms.push(AlgorithmSummary {
                label: e.label.clone(),
                algorithm: e.algorithm.clone(),
                mean_mse: mse.iter().sum::<f64>() / mse.len() as f64,
                tail_mse: tail_mean(&mse, TAIL_STEPS),
                min_avg_degree: deg.iter().copied().fold(f64::INFINITY, f64::min),
                max_avg_degree: deg.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                diverged_runs: e.diverged_runs,
            });
        }
        out.push(ReportSummary {
            directory: dir.clone(),
            runs: manifest.runs,
            tail_steps: TAIL_STEPS,
            algorithms,
        });
    }
    Ok(out)
}
