//! Replicated simulation experiments and their metric curves.
//!
//! Replicate `r` uses seed `base_seed + r`. Within a replicate one
//! potential-outcome table is drawn per setting and shared by every design.
//! Replicates run in parallel, but results are folded in replicate order, so
//! the output does not depend on the thread schedule.

mod metrics;
pub mod output;
pub mod presets;
mod race;

pub use metrics::{compute_metrics, MetricCurves, MetricPoint, RunningStat, Series};
pub use output::{write_manifest, write_metrics_csv, write_race_csv, write_raw_csv, Manifest, CSV_SCHEMA_VERSION};
pub use race::{run_stopping_race, RaceReplicate, StoppingRaceResult};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{run_trajectory, Design, DesignKind, Mode, TrajectoryConfig};
use crate::error::{MadError, Result};
use crate::inference::{cs_track, nonasymptotic_track, optimal_rho, Boundary, ConfidenceSequenceTrack, CsParams};
use crate::outcome::{generate_table, OutcomeModelSpec, PotentialOutcomeTable};
use crate::policy::PolicyKind;

/// One of the four per-step summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Running proportion of time points whose CS covered the running ATE.
    Coverage,
    /// Whether the CS has excluded zero at or before this time.
    Stopped,
    /// Time-average observed outcome.
    Reward,
    /// Full CS width `2 * radius`.
    Width,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Coverage, Metric::Stopped, Metric::Reward, Metric::Width];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Coverage => "coverage",
            Metric::Stopped => "stopped",
            Metric::Reward => "reward",
            Metric::Width => "width",
        }
    }
}

/// What kind of experiment a preset describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Standard,
    /// MAD vs Bernoulli on shared tables with the stop-when-zero-excluded rule.
    StoppingRace,
    /// Like `Standard`, but raw tracks and the running ATE are always kept.
    Nonstationary,
}

/// Boundary choice for the nonasymptotic comparison track.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonAsymptoticBoundary {
    /// Normal mixture; `rho` defaults to the value optimal at intrinsic time
    /// `rho_target`.
    NormalMixture {
        #[serde(default)]
        rho: Option<f64>,
        #[serde(default = "default_rho_target")]
        rho_target: f64,
    },
    /// Stitched sub-exponential boundary with scale `2 * outcome_bound / p_min`.
    /// `p_min` comes from the design; the standard bandit uses `1 / horizon`.
    Stitched {
        #[serde(default = "one")]
        outcome_bound: f64,
    },
}

fn default_rho_target() -> f64 {
    1e4
}

fn one() -> f64 {
    1.0
}

impl NonAsymptoticBoundary {
    fn resolve(&self, design: &DesignKind, n_arms: usize, horizon: usize, alpha: f64) -> Result<Boundary> {
        match *self {
            NonAsymptoticBoundary::NormalMixture { rho, rho_target } => Ok(Boundary::NormalMixture {
                rho: match rho {
                    Some(rho) => rho,
                    None => optimal_rho(rho_target, alpha)?,
                },
            }),
            NonAsymptoticBoundary::Stitched { outcome_bound } => {
                let p_min = design
                    .min_arm_probability(n_arms, horizon as u64)
                    .unwrap_or(1.0 / horizon as f64);
                Ok(Boundary::stitched(2.0 * outcome_bound / p_min))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            NonAsymptoticBoundary::NormalMixture { rho: Some(rho), .. } if !(rho > 0.0) => {
                Err(MadError::invalid("rho", "must be positive"))
            }
            NonAsymptoticBoundary::NormalMixture { rho_target, .. } if !(rho_target > 0.0) => {
                Err(MadError::invalid("rho_target", "must be positive"))
            }
            NonAsymptoticBoundary::Stitched { outcome_bound } if !(outcome_bound > 0.0) => {
                Err(MadError::invalid("outcome_bound", "must be positive"))
            }
            _ => Ok(()),
        }
    }
}

/// A labelled outcome model; one panel of output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Setting {
    pub label: String,
    pub outcome: OutcomeModelSpec,
}

fn default_mc_draws() -> usize {
    1000
}

fn default_alpha() -> f64 {
    0.05
}

fn default_pair() -> (usize, usize) {
    (1, 0)
}

fn default_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}

/// A complete, replicable experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPreset {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub settings: Vec<Setting>,
    pub policy: PolicyKind,
    #[serde(default = "default_mc_draws")]
    pub mc_draws: usize,
    pub designs: Vec<Design>,
    pub horizon: usize,
    pub replicates: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Explicit `eta`; otherwise derived from `t_star` (default: horizon).
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub t_star: Option<u64>,
    #[serde(default)]
    pub mode: Mode,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub experiment: ExperimentKind,
    /// Contrast `(treatment, control)` tracked by the CS.
    #[serde(default = "default_pair")]
    pub pair: (usize, usize),
    /// Also compute a nonasymptotic CS for every design.
    #[serde(default)]
    pub nonasymptotic: Option<NonAsymptoticBoundary>,
}

impl ExperimentPreset {
    pub fn cs_params(&self) -> Result<CsParams> {
        match self.eta {
            Some(eta) => CsParams::new(self.alpha, eta),
            None => CsParams::for_horizon(self.alpha, self.t_star.unwrap_or(self.horizon as u64)),
        }
    }

    /// Check every field; errors carry a dotted field path.
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(MadError::invalid("replicates", "must be at least 1"));
        }
        if self.horizon == 0 {
            return Err(MadError::invalid("horizon", "must be at least 1"));
        }
        if self.mc_draws == 0 {
            return Err(MadError::invalid("mc_draws", "must be at least 1"));
        }
        if self.settings.is_empty() {
            return Err(MadError::invalid("settings", "at least one setting is required"));
        }
        if self.designs.is_empty() {
            return Err(MadError::invalid("designs", "at least one design is required"));
        }
        if self.metrics.is_empty() {
            return Err(MadError::invalid("metrics", "at least one metric is required"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(MadError::invalid("alpha", format!("must lie in (0, 1), got {}", self.alpha)));
        }
        if let Some(eta) = self.eta {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(MadError::invalid("eta", format!("must be positive, got {eta}")));
            }
        }
        if self.t_star == Some(0) {
            return Err(MadError::invalid("t_star", "must be positive"));
        }
        self.mode.validate().map_err(|e| e.within("mode"))?;
        for (i, design) in self.designs.iter().enumerate() {
            if design.label.is_empty() {
                return Err(MadError::invalid(format!("designs[{i}].label"), "must not be empty"));
            }
            if self.designs[..i].iter().any(|d| d.label == design.label) {
                return Err(MadError::invalid(format!("designs[{i}].label"), format!("duplicate label `{}`", design.label)));
            }
            design.kind.validate().map_err(|e| e.within(&format!("designs[{i}]")))?;
        }
        let mut n_arms = None;
        for (i, setting) in self.settings.iter().enumerate() {
            setting
                .outcome
                .validate(self.horizon)
                .map_err(|e| e.within(&format!("settings[{i}].outcome")))?;
            let k = setting.outcome.n_arms();
            if *n_arms.get_or_insert(k) != k {
                return Err(MadError::invalid(format!("settings[{i}].outcome"), "all settings must have the same number of arms"));
            }
            if self.policy == PolicyKind::BetaThompson && !matches!(setting.outcome.laws, crate::outcome::ArmLaws::Bernoulli { .. }) {
                return Err(MadError::invalid(
                    "policy",
                    format!("beta_thompson needs Bernoulli outcomes, setting `{}` is {}", setting.label, setting.outcome.laws.family()),
                ));
            }
        }
        let k = n_arms.unwrap_or(2);
        let (w, v) = self.pair;
        if w >= k || v >= k || w == v {
            return Err(MadError::invalid("pair", format!("need two distinct arms below {k}")));
        }
        if let Some(boundary) = &self.nonasymptotic {
            boundary.validate().map_err(|e| e.within("nonasymptotic"))?;
            if self.mode != Mode::PerUnit {
                return Err(MadError::invalid("nonasymptotic", "requires per_unit mode"));
            }
        }
        if self.experiment == ExperimentKind::StoppingRace {
            if k != 2 {
                return Err(MadError::invalid("settings", "the stopping race is defined for two arms"));
            }
            if self.mode != Mode::PerUnit {
                return Err(MadError::invalid("mode", "the stopping race runs per unit"));
            }
            if !self.designs.iter().any(|d| matches!(d.kind, DesignKind::Mad { .. })) {
                return Err(MadError::invalid("designs", "the stopping race needs a MAD design"));
            }
        }
        self.cs_params()?;
        Ok(())
    }

    pub fn seed_for(base_seed: u64, replicate: usize) -> u64 {
        base_seed.wrapping_add(replicate as u64)
    }
}

/// Execution knobs that do not change results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; 0 means rayon's default.
    pub jobs: usize,
    /// Keep per-replicate tracks.
    pub raw: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { jobs: 0, raw: false }
    }
}

/// Per-replicate scalar outcomes used by summaries and acceptance checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateSummary {
    pub setting: String,
    pub series: String,
    pub replicate: usize,
    pub seed: u64,
    pub stop_time: Option<usize>,
    pub final_coverage: f64,
    pub final_center: f64,
    pub final_true_ate: f64,
    pub final_reward: f64,
    pub final_radius: f64,
    /// `(t, radius)` at t = 10, 100, 1000, ... up to the horizon.
    pub radius_checkpoints: Vec<(usize, f64)>,
    /// `(t, time-average reward)` on the same grid.
    pub reward_checkpoints: Vec<(usize, f64)>,
    /// Nonasymptotic series only: its radius was at least the asymptotic
    /// radius at every t >= 100.
    pub dominates_asymptotic: Option<bool>,
}

impl ReplicateSummary {
    pub fn radius_at(&self, t: usize) -> Option<f64> {
        self.radius_checkpoints.iter().find(|(s, _)| *s == t).map(|&(_, r)| r)
    }

    pub fn reward_at(&self, t: usize) -> Option<f64> {
        self.reward_checkpoints.iter().find(|(s, _)| *s == t).map(|&(_, r)| r)
    }
}

/// One CS per replicate, as written to the raw-tracks CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTrack {
    pub setting: String,
    pub series: String,
    pub replicate: usize,
    pub t: Vec<usize>,
    pub center: Vec<f64>,
    pub radius: Vec<f64>,
    pub s_hat: Vec<f64>,
    pub true_ate: Vec<f64>,
    pub stop_index: Option<usize>,
}

/// Everything a preset run produces.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetRun {
    pub preset: ExperimentPreset,
    pub base_seed: u64,
    pub curves: MetricCurves,
    pub summaries: Vec<ReplicateSummary>,
    pub raw: Vec<RawTrack>,
}

impl PresetRun {
    pub fn summaries_for<'a>(&'a self, setting: &'a str, series: &'a str) -> impl Iterator<Item = &'a ReplicateSummary> + 'a {
        self.summaries.iter().filter(move |s| s.setting == setting && s.series == series)
    }
}

/// Label used for the nonasymptotic companion of a design.
pub fn nonasymptotic_label(design: &str) -> String {
    format!("{design}[nonasymptotic]")
}

/// Per-point values of one series in one replicate.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesReplicate {
    pub setting: usize,
    pub series: String,
    pub t: Vec<usize>,
    pub values: Vec<(Metric, Vec<f64>)>,
}

struct ReplicateOutput {
    series: Vec<SeriesReplicate>,
    summaries: Vec<ReplicateSummary>,
    raw: Vec<RawTrack>,
}

fn checkpoints(horizon: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(10usize), |t| t.checked_mul(10))
        .take_while(|&t| t <= horizon)
        .collect();
    if out.last() != Some(&horizon) {
        out.push(horizon);
    }
    out
}

/// Curves of one interval track against the running truth.
pub(crate) fn interval_curves(
    intervals: &[(usize, f64, f64)],
    truth: &[f64],
    observed_prefix: &[f64],
    metrics: &[Metric],
) -> (Vec<(Metric, Vec<f64>)>, Option<usize>, f64) {
    let stop = crate::inference::stopping_index(intervals.iter().map(|&(_, c, r)| (c, r)));
    let mut covered = 0usize;
    let coverage: Vec<f64> = intervals
        .iter()
        .enumerate()
        .map(|(k, &(t, c, r))| {
            if (truth[t - 1] - c).abs() <= r {
                covered += 1;
            }
            covered as f64 / (k + 1) as f64
        })
        .collect();
    let final_coverage = coverage.last().copied().unwrap_or(1.0);
    let values = metrics
        .iter()
        .map(|&m| {
            let v: Vec<f64> = match m {
                Metric::Coverage => coverage.clone(),
                Metric::Stopped => (1..=intervals.len())
                    .map(|k| if stop.is_some_and(|s| s <= k) { 1.0 } else { 0.0 })
                    .collect(),
                Metric::Reward => intervals.iter().map(|&(t, _, _)| observed_prefix[t - 1] / t as f64).collect(),
                Metric::Width => intervals.iter().map(|&(_, _, r)| 2.0 * r).collect(),
            };
            (m, v)
        })
        .collect();
    (values, stop, final_coverage)
}

fn run_replicate(preset: &ExperimentPreset, params: CsParams, setting_index: usize, table: &PotentialOutcomeTable, replicate: usize, seed: u64, raw: bool) -> Result<ReplicateOutput> {
    let setting = &preset.settings[setting_index];
    let truth = table.true_ate_curve(preset.pair.0, preset.pair.1)?;
    let checkpoints = checkpoints(preset.horizon);
    let mut out = ReplicateOutput { series: Vec::new(), summaries: Vec::new(), raw: Vec::new() };
    for design in &preset.designs {
        let config = TrajectoryConfig {
            policy: preset.policy,
            design: design.clone(),
            mode: preset.mode,
            mc_draws: preset.mc_draws,
        };
        let trajectory = run_trajectory(table, &config, seed)?;
        let prefix: Vec<f64> = trajectory
            .observed()
            .scan(0.0, |acc, y| {
                *acc += y;
                Some(*acc)
            })
            .collect();
        let track = cs_track(&trajectory, preset.pair, params)?;
        let intervals: Vec<(usize, f64, f64)> = track.points.iter().map(|p| (p.t, p.center, p.radius)).collect();
        push_series(&mut out, preset, setting_index, &design.label, replicate, seed, &intervals, &truth, &prefix, &checkpoints, None);
        if raw {
            out.raw.push(raw_track(setting, &design.label, replicate, &track, &truth));
        }

        if let Some(kind) = &preset.nonasymptotic {
            let boundary = kind.resolve(&design.kind, table.n_arms(), preset.horizon, preset.alpha)?;
            let exact = nonasymptotic_track(&trajectory, preset.pair, preset.alpha, boundary)?;
            let exact_intervals: Vec<(usize, f64, f64)> = exact.points.iter().map(|p| (p.t, p.center, p.radius)).collect();
            let dominates = exact_intervals
                .iter()
                .zip(&intervals)
                .filter(|((t, _, _), _)| *t >= 100)
                .all(|((_, _, exact_r), (_, _, asym_r))| exact_r >= asym_r);
            let label = nonasymptotic_label(&design.label);
            push_series(&mut out, preset, setting_index, &label, replicate, seed, &exact_intervals, &truth, &prefix, &checkpoints, Some(dominates));
            if raw {
                out.raw.push(RawTrack {
                    setting: setting.label.clone(),
                    series: label,
                    replicate,
                    t: exact.points.iter().map(|p| p.t).collect(),
                    center: exact.points.iter().map(|p| p.center).collect(),
                    radius: exact.points.iter().map(|p| p.radius).collect(),
                    s_hat: exact.points.iter().map(|p| p.intrinsic_time).collect(),
                    true_ate: exact.points.iter().map(|p| truth[p.t - 1]).collect(),
                    stop_index: exact.stopping_time().stop_index,
                });
            }
        }
    }
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn push_series(
    out: &mut ReplicateOutput,
    preset: &ExperimentPreset,
    setting_index: usize,
    label: &str,
    replicate: usize,
    seed: u64,
    intervals: &[(usize, f64, f64)],
    truth: &[f64],
    prefix: &[f64],
    checkpoints: &[usize],
    dominates_asymptotic: Option<bool>,
) {
    let (values, stop, final_coverage) = interval_curves(intervals, truth, prefix, &preset.metrics);
    let last = intervals.last().copied().unwrap_or((1, 0.0, f64::INFINITY));
    let radius_at = |t: usize| {
        let k = intervals.partition_point(|&(s, _, _)| s <= t);
        (k > 0).then(|| intervals[k - 1].2)
    };
    out.summaries.push(ReplicateSummary {
        setting: preset.settings[setting_index].label.clone(),
        series: label.to_string(),
        replicate,
        seed,
        stop_time: stop.map(|s| intervals[s - 1].0),
        final_coverage,
        final_center: last.1,
        final_true_ate: truth[last.0 - 1],
        final_reward: prefix[last.0 - 1] / last.0 as f64,
        final_radius: last.2,
        radius_checkpoints: checkpoints.iter().filter_map(|&t| radius_at(t).map(|r| (t, r))).collect(),
        reward_checkpoints: checkpoints.iter().filter(|&&t| t <= prefix.len()).map(|&t| (t, prefix[t - 1] / t as f64)).collect(),
        dominates_asymptotic,
    });
    out.series.push(SeriesReplicate {
        setting: setting_index,
        series: label.to_string(),
        t: intervals.iter().map(|&(t, _, _)| t).collect(),
        values,
    });
}

fn raw_track(setting: &Setting, label: &str, replicate: usize, track: &ConfidenceSequenceTrack, truth: &[f64]) -> RawTrack {
    RawTrack {
        setting: setting.label.clone(),
        series: label.to_string(),
        replicate,
        t: track.points.iter().map(|p| p.t).collect(),
        center: track.points.iter().map(|p| p.center).collect(),
        radius: track.points.iter().map(|p| p.radius).collect(),
        s_hat: track.points.iter().map(|p| p.s_hat).collect(),
        true_ate: track.points.iter().map(|p| truth[p.t - 1]).collect(),
        stop_index: track.stopping_time().stop_index,
    }
}

pub(crate) fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if jobs > 0 {
        builder = builder.num_threads(jobs);
    }
    let pool = builder
        .build()
        .map_err(|e| MadError::InvariantViolation(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

/// Run every replicate of a standard or nonstationary preset.
pub fn run_preset(preset: &ExperimentPreset, base_seed: u64, options: RunOptions) -> Result<PresetRun> {
    preset.validate()?;
    if preset.experiment == ExperimentKind::StoppingRace {
        return Err(MadError::invalid("experiment", "use run_stopping_race for stopping-race presets"));
    }
    let params = preset.cs_params()?;
    let keep_raw = options.raw || preset.experiment == ExperimentKind::Nonstationary;
    let mut curves = MetricCurves::new(preset.settings.iter().map(|s| s.label.clone()).collect());
    let mut summaries = Vec::new();
    let mut raw = Vec::new();

    with_pool(options.jobs, || -> Result<()> {
        let chunk = (rayon::current_num_threads() * 2).max(4);
        let mut start = 0;
        while start < preset.replicates {
            let end = (start + chunk).min(preset.replicates);
            let outputs: Vec<Result<Vec<ReplicateOutput>>> = (start..end)
                .into_par_iter()
                .map(|r| {
                    let seed = ExperimentPreset::seed_for(base_seed, r);
                    (0..preset.settings.len())
                        .map(|s| {
                            let table = generate_table(&preset.settings[s].outcome, preset.horizon, seed)?;
                            run_replicate(preset, params, s, &table, r, seed, keep_raw)
                        })
                        .collect()
                })
                .collect();
            for replicate in outputs {
                for out in replicate? {
                    for series in &out.series {
                        curves.absorb(series)?;
                    }
                    summaries.extend(out.summaries);
                    raw.extend(out.raw);
                }
            }
            start = end;
        }
        Ok(())
    })??;

    Ok(PresetRun {
        preset: preset.clone(),
        base_seed,
        curves,
        summaries,
        raw,
    })
}

/// Nonstationary run: identical to [`run_preset`] but always keeps the raw
/// tracks with the running ATE for overlay plots.
pub fn run_nonstationary(preset: &ExperimentPreset, base_seed: u64, options: RunOptions) -> Result<PresetRun> {
    if preset.settings.iter().all(|s| s.outcome.changepoints.is_empty()) {
        return Err(MadError::invalid("settings", "a nonstationary run needs at least one changepoint"));
    }
    run_preset(preset, base_seed, RunOptions { raw: true, ..options })
}

/// Dispatch on the preset's experiment kind.
pub enum ExperimentOutput {
    Curves(PresetRun),
    Race(StoppingRaceResult),
}

pub fn run_experiment(preset: &ExperimentPreset, base_seed: u64, options: RunOptions) -> Result<ExperimentOutput> {
    match preset.experiment {
        ExperimentKind::Standard => run_preset(preset, base_seed, options).map(ExperimentOutput::Curves),
        ExperimentKind::Nonstationary => run_nonstationary(preset, base_seed, options).map(ExperimentOutput::Curves),
        ExperimentKind::StoppingRace => {
            preset.validate()?;
            let schedule = preset
                .designs
                .iter()
                .find_map(|d| match d.kind {
                    DesignKind::Mad { schedule } => Some(schedule),
                    _ => None,
                })
                .expect("validated");
            let setting = &preset.settings[0];
            run_stopping_race(
                &setting.outcome,
                schedule,
                preset.policy,
                preset.replicates,
                preset.horizon,
                base_seed,
                preset.cs_params()?,
                options.jobs,
            )
            .map(|mut r| {
                r.setting = setting.label.clone();
                ExperimentOutput::Race(r)
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::DeltaSchedule;

    fn small_preset() -> ExperimentPreset {
        ExperimentPreset {
            name: "small".into(),
            description: String::new(),
            settings: vec![
                Setting { label: "null".into(), outcome: OutcomeModelSpec::bernoulli(&[0.5, 0.5]) },
                Setting { label: "ate_0.6".into(), outcome: OutcomeModelSpec::bernoulli(&[0.2, 0.8]) },
            ],
            policy: PolicyKind::BetaThompson,
            mc_draws: 100,
            designs: vec![
                Design::bernoulli(),
                Design::standard_bandit(),
                Design::mad("unclipped_mad", DeltaSchedule::Power { a: 0.24 }),
            ],
            horizon: 400,
            replicates: 7,
            alpha: 0.05,
            eta: None,
            t_star: None,
            mode: Mode::PerUnit,
            metrics: Metric::ALL.to_vec(),
            experiment: ExperimentKind::Standard,
            pair: (1, 0),
            nonasymptotic: None,
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let preset = small_preset();
        let a = run_preset(&preset, 3, RunOptions { jobs: 1, raw: true }).unwrap();
        let b = run_preset(&preset, 3, RunOptions { jobs: 3, raw: true }).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn replicate_seeds_and_shapes() {
        let preset = small_preset();
        let run = run_preset(&preset, 10, RunOptions::default()).unwrap();
        assert_eq!(run.summaries.len(), 7 * 2 * 3);
        assert!(run.summaries.iter().all(|s| s.seed == 10 + s.replicate as u64));
        assert_eq!(run.curves.series.len(), 2 * 3);
        for series in &run.curves.series {
            assert_eq!(series.t.len(), 400);
            let stopped = series.metric(Metric::Stopped).unwrap();
            assert!(stopped.windows(2).all(|w| w[1].mean >= w[0].mean));
            for m in [Metric::Coverage, Metric::Stopped] {
                assert!(series.metric(m).unwrap().iter().all(|p| (0.0..=1.0).contains(&p.mean)));
            }
        }
        assert!(run.raw.is_empty());
    }

    #[test]
    fn curves_match_recomputation_from_summaries() {
        let preset = small_preset();
        let run = run_preset(&preset, 1, RunOptions::default()).unwrap();
        let series = run.curves.get("ate_0.6", "unclipped_mad").unwrap();
        let last = series.last(Metric::Coverage).unwrap();
        let finals: Vec<f64> = run.summaries_for("ate_0.6", "unclipped_mad").map(|s| s.final_coverage).collect();
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        assert!((last.mean - mean).abs() < 1e-12);
        assert_eq!(last.n, 7);
    }

    #[test]
    fn nonstationary_requires_changepoint_and_keeps_raw() {
        let mut preset = small_preset();
        assert!(run_nonstationary(&preset, 0, RunOptions::default()).is_err());
        preset.settings.truncate(1);
        preset.settings[0].outcome = OutcomeModelSpec::bernoulli(&[0.2, 0.8])
            .with_changepoint(201, crate::outcome::ArmLaws::Bernoulli { p: vec![0.2, 0.1] });
        preset.experiment = ExperimentKind::Nonstationary;
        let run = run_nonstationary(&preset, 0, RunOptions::default()).unwrap();
        assert_eq!(run.raw.len(), 7 * 3);
        let track = &run.raw[0];
        let table = generate_table(&preset.settings[0].outcome, 400, 0).unwrap();
        assert_eq!(track.true_ate, table.true_ate_curve(1, 0).unwrap());
        assert_eq!(track.t.len(), 400);
    }

    #[test]
    fn validation_paths() {
        let mut p = small_preset();
        p.designs[2] = Design::mad("bad", DeltaSchedule::Power { a: -1.0 });
        assert!(p.validate().unwrap_err().to_string().contains("designs[2].schedule.a"));
        let mut p = small_preset();
        p.alpha = 1.5;
        assert!(p.validate().unwrap_err().to_string().contains("alpha"));
        let mut p = small_preset();
        p.mode = Mode::Batched { batch_size: 0 };
        assert!(p.validate().unwrap_err().to_string().contains("mode.batch_size"));
        let mut p = small_preset();
        p.settings[1].outcome = OutcomeModelSpec::bernoulli(&[0.2, 1.8]);
        assert!(p.validate().unwrap_err().to_string().contains("settings[1].outcome.p[1]"));
        let mut p = small_preset();
        p.designs[1].label = "bernoulli".into();
        assert!(p.validate().unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn checkpoint_grid() {
        assert_eq!(checkpoints(10_000), vec![10, 100, 1000, 10_000]);
        assert_eq!(checkpoints(400), vec![10, 100, 400]);
        assert_eq!(checkpoints(5), vec![5]);
    }
}
