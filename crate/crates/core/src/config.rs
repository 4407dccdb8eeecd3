//! JSON run configuration and command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{MadError, Result};
use crate::harness::{presets, ExperimentPreset, RunOptions};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "MAD_OUT";
pub const DEFAULT_OUT: &str = "results";

fn default_stride() -> usize {
    1
}

/// An experiment plus where and how to run it.
///
/// On disk this is a single flat JSON object: every [`ExperimentPreset`]
/// field alongside `base_seed`, `out`, `raw`, `jobs` and `stride`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub experiment: ExperimentPreset,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub raw: bool,
    /// Worker threads; defaults to the number of available cores.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
    /// Write every `stride`-th time point to the CSVs (the last is always kept).
    #[serde(default = "default_stride")]
    pub stride: usize,
}

const RUN_FIELDS: [&str; 5] = ["base_seed", "out", "raw", "jobs", "stride"];
const PRESET_FIELDS: [&str; 15] = [
    "name",
    "description",
    "settings",
    "policy",
    "mc_draws",
    "designs",
    "horizon",
    "replicates",
    "alpha",
    "eta",
    "t_star",
    "mode",
    "metrics",
    "experiment",
    "pair",
];

#[derive(Deserialize)]
struct RunFields {
    #[serde(default)]
    base_seed: u64,
    #[serde(default)]
    out: Option<PathBuf>,
    #[serde(default)]
    raw: bool,
    #[serde(default)]
    jobs: Option<usize>,
    #[serde(default = "default_stride")]
    stride: usize,
}

fn deserialize_with_path<T: serde::de::DeserializeOwned>(value: serde_json::Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        MadError::invalid(if path == "." { "config".to_string() } else { path }, e.into_inner().to_string())
    })
}

/// Flag values that replace config fields.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub horizon: Option<usize>,
    pub out: Option<PathBuf>,
    pub raw: bool,
    pub jobs: Option<usize>,
    pub alpha: Option<f64>,
    pub eta: Option<f64>,
    pub t_star: Option<u64>,
    pub stride: Option<usize>,
}

impl RunConfig {
    pub fn from_preset(experiment: ExperimentPreset) -> Self {
        RunConfig { experiment, base_seed: 0, out: None, raw: false, jobs: None, stride: 1 }
    }

    /// Built-in preset by name; unknown names list the valid ones.
    pub fn named(name: &str) -> Result<Self> {
        presets::preset(name).map(Self::from_preset).ok_or_else(|| {
            MadError::invalid("preset", format!("unknown preset `{name}`; valid presets: {}", presets::NAMES.join(", ")))
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if let Some(map) = value.as_object() {
            let known = |k: &str| RUN_FIELDS.contains(&k) || PRESET_FIELDS.contains(&k) || k == "nonasymptotic";
            if let Some(key) = map.keys().find(|k| !known(k)) {
                return Err(MadError::invalid(key.clone(), "unknown field"));
            }
        }
        let mut value = value;
        let run_part: serde_json::Map<String, serde_json::Value> = match value.as_object_mut() {
            Some(map) => RUN_FIELDS.iter().filter_map(|&k| map.remove(k).map(|v| (k.to_string(), v))).collect(),
            None => serde_json::Map::new(),
        };
        let experiment: ExperimentPreset = deserialize_with_path(value)?;
        let run: RunFields = deserialize_with_path(serde_json::Value::Object(run_part))?;
        Ok(RunConfig {
            experiment,
            base_seed: run.base_seed,
            out: run.out,
            raw: run.raw,
            jobs: run.jobs,
            stride: run.stride,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn apply(&mut self, o: &Overrides) {
        let e = &mut self.experiment;
        if let Some(v) = o.seed {
            self.base_seed = v;
        }
        if let Some(v) = o.replicates {
            e.replicates = v;
        }
        if let Some(v) = o.horizon {
            e.horizon = v;
        }
        if let Some(v) = &o.out {
            self.out = Some(v.clone());
        }
        if o.raw {
            self.raw = true;
        }
        if let Some(v) = o.jobs {
            self.jobs = Some(v);
        }
        if let Some(v) = o.alpha {
            e.alpha = v;
        }
        if let Some(v) = o.eta {
            e.eta = Some(v);
        }
        if let Some(v) = o.t_star {
            e.t_star = Some(v);
        }
        if let Some(v) = o.stride {
            self.stride = v;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.jobs == Some(0) {
            return Err(MadError::invalid("jobs", "must be at least 1"));
        }
        if self.stride == 0 {
            return Err(MadError::invalid("stride", "must be at least 1"));
        }
        if self.experiment.name.is_empty() || self.experiment.name.contains(['/', '\\']) {
            return Err(MadError::invalid("name", "must be a non-empty file-name stem"));
        }
        self.experiment.validate()
    }

    /// `out`, else `$MAD_OUT`, else `results`.
    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn run_options(&self) -> RunOptions {
        RunOptions {
            jobs: self.jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            raw: self.raw,
        }
    }
}
