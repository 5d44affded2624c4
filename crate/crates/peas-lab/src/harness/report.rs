//! Machine-readable experiment reports: CSV (one row per measurement) plus a
//! JSON mirror carrying the full structure, config hash, and optional
//! per-sample candidate dumps. Report bytes are deterministic for a fixed
//! (config, seed); wall-clock metadata lives in a separate file.

use crate::error::{Error, Result};
use crate::rng::rng_for;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

pub const BOOTSTRAP_RESAMPLES: usize = 1000;

/// One measurement. Aggregate rows use `victim` = "macro"/"micro" (with
/// `surrogate` = "all") or `surrogate` = "avg" for per-victim averages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub dataset: String,
    pub victim: String,
    pub surrogate: String,
    pub strategy: String,
    pub sampling: String,
    pub attack: String,
    pub epsilon: f32,
    pub n: usize,
    pub asr: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub pool_size: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateDump {
    pub index: usize,
    pub et: f32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub et_augmented: Option<f32>,
    pub l2: f32,
    pub linf: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedDump {
    pub strategy: String,
    pub index: usize,
    pub used_fallback: bool,
}

/// Per-sample exploration record (enabled by `candidate_dumps`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDump {
    pub victim: String,
    pub surrogate: String,
    pub sample: usize,
    pub label: usize,
    pub sampling: String,
    pub selected: Vec<SelectedDump>,
    pub candidates: Vec<CandidateDump>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Which operation produced this: pairwise, sweep-n, sweep-eps, sweep-aug.
    pub kind: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub rows: Vec<ReportRow>,
    pub notes: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dumps: Option<Vec<SampleDump>>,
}

/// Wall-clock metadata, kept out of the deterministic report files.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunMeta {
    pub wall_time_secs: f64,
}

/// Percentile bootstrap CI (2.5% / 97.5%) for a mean of binary outcomes.
pub fn bootstrap_ci(successes: &[bool], resamples: usize, seed: u64) -> (f64, f64) {
    if successes.is_empty() {
        return (0.0, 0.0);
    }
    let mut rng = rng_for(seed, &[0xB007]);
    let n = successes.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let hits = (0..n).filter(|_| successes[rng.gen_range(0..n)]).count();
            hits as f64 / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);
    percentile_bounds(&means)
}

/// Percentile bootstrap CI for a mean of real values (used for macro
/// averages over role pairs).
pub fn bootstrap_ci_values(values: &[f64], resamples: usize, seed: u64) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mut rng = rng_for(seed, &[0xB017]);
    let n = values.len();
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.gen_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    percentile_bounds(&means)
}

fn percentile_bounds(sorted: &[f64]) -> (f64, f64) {
    let r = sorted.len();
    let lo = sorted[((r as f64 * 0.025).floor() as usize).min(r - 1)];
    let hi = sorted[((r as f64 * 0.975).ceil() as usize).saturating_sub(1).min(r - 1)];
    (lo, hi)
}

pub fn report_to_csv(report: &ExperimentReport) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in &report.rows {
        writer.serialize(row)?;
    }
    let bytes = writer.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Csv(e.to_string()))
}

pub fn rows_from_csv(text: &str) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        rows.push(record?);
    }
    Ok(rows)
}

/// Write a report into a fresh timestamped subdirectory of `dir` and return
/// that subdirectory. Reruns never overwrite earlier results.
pub fn write_report(report: &ExperimentReport, dir: &Path, meta: &RunMeta) -> Result<PathBuf> {
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    let short_hash: String = report.config_hash.chars().take(8).collect();
    let mut run_dir = dir.join(format!("{}-{}-{}", report.kind, nanos, short_hash));
    let mut bump = 0u32;
    while run_dir.exists() {
        bump += 1;
        run_dir = dir.join(format!("{}-{}-{}-{}", report.kind, nanos, short_hash, bump));
    }
    fs::create_dir_all(&run_dir)?;
    fs::write(run_dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    fs::write(run_dir.join("report.csv"), report_to_csv(report)?)?;
    fs::write(run_dir.join("run-meta.json"), serde_json::to_string_pretty(meta)?)?;
    Ok(run_dir)
}

pub fn load_report(run_dir: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(run_dir.join("report.json"))?;
    Ok(serde_json::from_str(&text)?)
}
