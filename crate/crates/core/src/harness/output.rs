//! CSV and manifest writers.
//!
//! Column layouts are fixed; any change bumps [`CSV_SCHEMA_VERSION`].

use std::io::Write;

use serde::Serialize;

use super::{MetricCurves, RawTrack, StoppingRaceResult};
use crate::error::Result;

pub const CSV_SCHEMA_VERSION: u32 = 1;

pub const METRICS_COLUMNS: [&str; 6] = ["setting", "design", "t", "metric", "mean", "se"];
pub const RAW_COLUMNS: [&str; 9] = ["setting", "design", "replicate", "t", "center", "radius", "s_hat", "stopped", "true_ate"];
pub const RACE_COLUMNS: [&str; 10] = [
    "setting",
    "replicate",
    "seed",
    "mad_stop",
    "bernoulli_stop",
    "stop_gap",
    "truncation",
    "bernoulli_arm",
    "mad_reward",
    "bernoulli_reward",
];

fn keep(k: usize, len: usize, stride: usize) -> bool {
    k % stride.max(1) == 0 || k + 1 == len
}

/// Long-format metric curves; every `stride`-th point plus the last one.
pub fn write_metrics_csv<W: Write>(writer: W, curves: &MetricCurves, stride: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(METRICS_COLUMNS)?;
    for series in &curves.series {
        for metric in series.metrics() {
            let points = series.metric(metric).expect("listed metric");
            for (k, (t, p)) in series.t.iter().zip(&points).enumerate() {
                if keep(k, points.len(), stride) {
                    w.write_record([
                        series.setting.as_str(),
                        series.design.as_str(),
                        &t.to_string(),
                        metric.name(),
                        &p.mean.to_string(),
                        &p.se.to_string(),
                    ])?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// One row per replicate and time point.
pub fn write_raw_csv<W: Write>(writer: W, tracks: &[RawTrack], stride: usize) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RAW_COLUMNS)?;
    for track in tracks {
        let len = track.t.len();
        for k in (0..len).filter(|&k| keep(k, len, stride)) {
            let stopped = track.stop_index.is_some_and(|s| s <= k + 1);
            w.write_record([
                track.setting.as_str(),
                track.series.as_str(),
                &track.replicate.to_string(),
                &track.t[k].to_string(),
                &track.center[k].to_string(),
                &track.radius[k].to_string(),
                &track.s_hat[k].to_string(),
                if stopped { "1" } else { "0" },
                &track.true_ate[k].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// One row per race replicate; rewards are cumulative averages at truncation.
pub fn write_race_csv<W: Write>(writer: W, race: &StoppingRaceResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RACE_COLUMNS)?;
    for r in &race.replicates {
        let (m, b) = r.final_rewards();
        w.write_record([
            race.setting.clone(),
            r.replicate.to_string(),
            r.seed.to_string(),
            opt(r.mad_stop),
            opt(r.bernoulli_stop),
            opt(r.stop_gap()),
            r.truncation.to_string(),
            opt(r.bernoulli_arm),
            m.to_string(),
            b.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Run manifest written next to the CSVs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub preset: String,
    pub base_seed: u64,
    pub replicates: usize,
    /// Seeds `base_seed .. base_seed + replicates`.
    pub seeds: Vec<u64>,
    pub mad_version: String,
    pub csv_schema_version: u32,
    pub files: Vec<ManifestFile>,
    pub wall_time_seconds: f64,
    pub jobs: usize,
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestFile {
    pub path: String,
    pub columns: Vec<String>,
}

impl ManifestFile {
    pub fn new(path: impl Into<String>, columns: &[&str]) -> Self {
        ManifestFile {
            path: path.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
        }
    }
}

pub fn write_manifest<W: Write>(writer: W, manifest: &Manifest) -> Result<()> {
    let mut writer = writer;
    serde_json::to_writer_pretty(&mut writer, manifest)?;
    writer.write_all(b"\n")?;
    Ok(())
}
