//! Metric curves and their replicate aggregation.

use serde::Serialize;

use super::{interval_curves, Metric, SeriesReplicate};
use crate::design::Trajectory;
use crate::error::{MadError, Result};
use crate::inference::ConfidenceSequenceTrack;

/// Welford accumulator for mean and standard error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RunningStat {
    n: usize,
    mean: f64,
    m2: f64,
}

impl RunningStat {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation over `sqrt(n)`; zero for fewer than two values.
    pub fn se(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            (self.m2 / (self.n - 1) as f64).sqrt() / (self.n as f64).sqrt()
        }
    }

    pub fn point(&self) -> MetricPoint {
        MetricPoint { mean: self.mean(), se: self.se(), n: self.n }
    }
}

/// Mean and standard error across replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricPoint {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

/// Aggregated curves of one design (or its nonasymptotic companion) in one setting.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub setting: String,
    pub design: String,
    pub t: Vec<usize>,
    stats: Vec<(Metric, Vec<RunningStat>)>,
}

impl Series {
    pub fn metrics(&self) -> impl Iterator<Item = Metric> + '_ {
        self.stats.iter().map(|(m, _)| *m)
    }

    pub fn metric(&self, metric: Metric) -> Option<Vec<MetricPoint>> {
        self.stats
            .iter()
            .find(|(m, _)| *m == metric)
            .map(|(_, v)| v.iter().map(RunningStat::point).collect())
    }

    /// Aggregate at the last point with `t' <= t`.
    pub fn at(&self, metric: Metric, t: usize) -> Option<MetricPoint> {
        let k = self.t.partition_point(|&s| s <= t);
        if k == 0 {
            return None;
        }
        self.stats.iter().find(|(m, _)| *m == metric).map(|(_, v)| v[k - 1].point())
    }

    pub fn last(&self, metric: Metric) -> Option<MetricPoint> {
        self.t.last().and_then(|&t| self.at(metric, t))
    }
}

/// All aggregated series of a run, in first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricCurves {
    pub settings: Vec<String>,
    pub series: Vec<Series>,
}

impl MetricCurves {
    pub fn new(settings: Vec<String>) -> Self {
        MetricCurves { settings, series: Vec::new() }
    }

    pub fn get(&self, setting: &str, design: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.setting == setting && s.design == design)
    }

    /// Add a series from already aggregated statistics at `t = 1..=len`.
    pub(crate) fn insert_series(&mut self, setting: usize, design: &str, metric: Metric, stats: Vec<RunningStat>) {
        self.series.push(Series {
            setting: self.settings[setting].clone(),
            design: design.to_string(),
            t: (1..=stats.len()).collect(),
            stats: vec![(metric, stats)],
        });
    }

    pub(crate) fn absorb(&mut self, replicate: &SeriesReplicate) -> Result<()> {
        let setting = &self.settings[replicate.setting];
        let index = match self
            .series
            .iter()
            .position(|s| &s.setting == setting && s.design == replicate.series)
        {
            Some(i) => i,
            None => {
                self.series.push(Series {
                    setting: setting.clone(),
                    design: replicate.series.clone(),
                    t: replicate.t.clone(),
                    stats: replicate
                        .values
                        .iter()
                        .map(|(m, _)| (*m, vec![RunningStat::default(); replicate.t.len()]))
                        .collect(),
                });
                self.series.len() - 1
            }
        };
        let series = &mut self.series[index];
        if series.t != replicate.t {
            return Err(MadError::Misaligned(format!(
                "series {}/{} has a different time grid across replicates",
                series.setting, series.design
            )));
        }
        for ((m, stats), (m2, values)) in series.stats.iter_mut().zip(&replicate.values) {
            debug_assert_eq!(m, m2);
            for (s, &x) in stats.iter_mut().zip(values) {
                s.push(x);
            }
        }
        Ok(())
    }
}

/// Per-point metric values of one replicate's CS.
///
/// `truth[t - 1]` is the running ATE after `t` units.
pub fn compute_metrics(
    track: &ConfidenceSequenceTrack,
    trajectory: &Trajectory,
    truth: &[f64],
    metrics: &[Metric],
) -> Result<Vec<(Metric, Vec<f64>)>> {
    if truth.len() < trajectory.len() {
        return Err(MadError::Misaligned(format!(
            "truth has {} points, trajectory has {} units",
            truth.len(),
            trajectory.len()
        )));
    }
    let prefix: Vec<f64> = trajectory
        .observed()
        .scan(0.0, |acc, y| {
            *acc += y;
            Some(*acc)
        })
        .collect();
    let intervals: Vec<(usize, f64, f64)> = track.points.iter().map(|p| (p.t, p.center, p.radius)).collect();
    Ok(interval_curves(&intervals, truth, &prefix, metrics).0)
}
