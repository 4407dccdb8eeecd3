//! IPW estimation and anytime-valid confidence sequences for pairwise ATEs.

mod boundary;

pub use boundary::{optimal_rho, Boundary};

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::design::{Mode, Trajectory};
use crate::error::{check_arm, MadError, Result};
use crate::policy::AssignmentDistribution;

/// Per-unit IPW contribution `(tau_hat, sigma2_hat)` to the contrast
/// `w - w_prime` for a unit assigned `arm` with probabilities `probs`.
pub fn ipw_step(arm: usize, outcome: f64, probs: &AssignmentDistribution, pair: (usize, usize)) -> Result<(f64, f64)> {
    let (w, w_prime) = pair;
    let k = probs.n_arms();
    check_arm(arm, k)?;
    check_arm(w, k)?;
    check_arm(w_prime, k)?;
    let sign = if arm == w {
        1.0
    } else if arm == w_prime {
        -1.0
    } else {
        return Ok((0.0, 0.0));
    };
    let p = probs[arm];
    if p <= 0.0 {
        return Err(MadError::InvariantViolation(format!(
            "arm {arm} was realized with recorded probability {p}"
        )));
    }
    let weighted = outcome / p;
    Ok((sign * weighted, weighted * weighted))
}

/// Radius of the asymptotic confidence sequence:
/// `sqrt( 2(S eta^2 + 1) / (t^2 eta^2) * ln( sqrt(S eta^2 + 1) / alpha ) )`.
pub fn asymptotic_radius(s_hat: f64, t: u64, eta: f64, alpha: f64) -> f64 {
    let eta2 = eta * eta;
    let x = s_hat * eta2 + 1.0;
    let t = t as f64;
    (2.0 * x / (t * t * eta2) * (x.sqrt() / alpha).ln()).sqrt()
}

/// The `eta` that tunes the asymptotic CS to be tightest near `t_star`.
pub fn eta_for_horizon(alpha: f64, t_star: u64) -> f64 {
    let l = -2.0 * alpha.ln();
    ((l + (l + 1.0).ln()) / t_star as f64).sqrt()
}

/// Validated `(alpha, eta)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CsParams {
    pub alpha: f64,
    pub eta: f64,
}

impl CsParams {
    pub fn new(alpha: f64, eta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(MadError::invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
        }
        if !(eta.is_finite() && eta > 0.0) {
            return Err(MadError::invalid("eta", format!("must be positive, got {eta}")));
        }
        Ok(CsParams { alpha, eta })
    }

    pub fn for_horizon(alpha: f64, t_star: u64) -> Result<Self> {
        if t_star == 0 {
            return Err(MadError::invalid("t_star", "must be positive"));
        }
        Self::new(alpha, eta_for_horizon(alpha, t_star))
    }
}

/// Running per-arm IPW sums. Because at most one arm is realized per unit,
/// every pairwise `tau_hat` sum and `S_hat` follow from per-arm totals.
#[derive(Debug, Clone, PartialEq)]
pub struct IpwAccumulator {
    weighted: Vec<f64>,
    weighted_sq: Vec<f64>,
    units: u64,
}

impl IpwAccumulator {
    pub fn new(n_arms: usize) -> Self {
        IpwAccumulator {
            weighted: vec![0.0; n_arms],
            weighted_sq: vec![0.0; n_arms],
            units: 0,
        }
    }

    pub fn units(&self) -> u64 {
        self.units
    }

    pub fn push(&mut self, arm: usize, outcome: f64, probs: &AssignmentDistribution) -> Result<()> {
        let (x, x2) = ipw_step(arm, outcome, probs, (arm, (arm + 1) % probs.n_arms()))?;
        self.weighted[arm] += x;
        self.weighted_sq[arm] += x2;
        self.units += 1;
        Ok(())
    }

    /// IPW estimate of the running mean outcome of `arm`.
    pub fn arm_mean(&self, arm: usize) -> f64 {
        if self.units == 0 {
            return 0.0;
        }
        self.weighted[arm] / self.units as f64
    }

    /// Current `(center, radius, S_hat)` for the contrast `w - w_prime`.
    pub fn interval(&self, pair: (usize, usize), params: CsParams) -> Result<(f64, f64, f64)> {
        let (w, w_prime) = pair;
        check_arm(w, self.weighted.len())?;
        check_arm(w_prime, self.weighted.len())?;
        if self.units == 0 {
            return Err(MadError::InvariantViolation("no observed units yet".into()));
        }
        let s_hat = self.weighted_sq[w] + self.weighted_sq[w_prime];
        let center = (self.weighted[w] - self.weighted[w_prime]) / self.units as f64;
        Ok((center, asymptotic_radius(s_hat, self.units, params.eta, params.alpha), s_hat))
    }
}

/// One time point of a confidence sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsPoint {
    /// Units observed so far (batch boundary in batched mode).
    pub t: usize,
    pub center: f64,
    pub radius: f64,
    pub s_hat: f64,
}

impl CsPoint {
    pub fn covers(&self, target: f64) -> bool {
        (target - self.center).abs() <= self.radius
    }

    pub fn excludes_zero(&self) -> bool {
        self.center.abs() > self.radius
    }
}

/// Asymptotic confidence sequence for one contrast.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceSequenceTrack {
    pub pair: (usize, usize),
    pub params: CsParams,
    pub batch_size: usize,
    /// One point per unit (per batch in batched mode).
    pub points: Vec<CsPoint>,
}

/// Result of the "stop once zero leaves the CS" rule.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingReport {
    /// 1-based index into the track, `None` if the CS never excluded zero.
    pub stop_index: Option<usize>,
    /// Units observed at the stopping index.
    pub stop_time: Option<usize>,
    pub rule: String,
}

impl std::fmt::Display for StoppingReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.stop_time {
            Some(t) => write!(f, "stopped at t={t} ({})", self.rule),
            None => write!(f, "never within horizon ({})", self.rule),
        }
    }
}

/// First 1-based index at which `|center| > radius`.
pub fn stopping_index(intervals: impl IntoIterator<Item = (f64, f64)>) -> Option<usize> {
    intervals
        .into_iter()
        .position(|(center, radius)| center.abs() > radius)
        .map(|i| i + 1)
}

impl ConfidenceSequenceTrack {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn stopping_time(&self) -> StoppingReport {
        let stop_index = stopping_index(self.points.iter().map(|p| (p.center, p.radius)));
        StoppingReport {
            stop_index,
            stop_time: stop_index.map(|i| self.points[i - 1].t),
            rule: "first t with 0 outside center ± asymptotic radius".into(),
        }
    }

    /// Point at or before `t` units.
    pub fn at_time(&self, t: usize) -> Option<&CsPoint> {
        match self.points.binary_search_by_key(&t, |p| p.t) {
            Ok(i) => Some(&self.points[i]),
            Err(0) => None,
            Err(i) => Some(&self.points[i - 1]),
        }
    }

    /// CSV with columns `t,center,radius,s_hat,stopped`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let stop = self.stopping_time().stop_index.unwrap_or(usize::MAX);
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "center", "radius", "s_hat", "stopped"])?;
        for (i, p) in self.points.iter().enumerate() {
            w.write_record([
                p.t.to_string(),
                p.center.to_string(),
                p.radius.to_string(),
                p.s_hat.to_string(),
                u8::from(i + 1 >= stop).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn check_pair(trajectory: &Trajectory, pair: (usize, usize)) -> Result<()> {
    check_arm(pair.0, trajectory.n_arms)?;
    check_arm(pair.1, trajectory.n_arms)?;
    if pair.0 == pair.1 {
        return Err(MadError::invalid("pair", "the two arms of a contrast must differ"));
    }
    Ok(())
}

/// Per-unit `(tau_hat, sigma2_hat)` contributions along a trajectory.
pub fn contributions(trajectory: &Trajectory, pair: (usize, usize)) -> Result<Vec<(f64, f64)>> {
    check_pair(trajectory, pair)?;
    trajectory
        .steps
        .iter()
        .map(|s| ipw_step(s.chosen_arm, s.observed_outcome, &s.mixed, pair))
        .collect()
}

/// Asymptotic CS for the contrast `pair` along a trajectory.
///
/// Per-unit mode uses the running IPW mean and `S_hat`. Batched mode averages
/// contributions within each batch, accumulates `S_hat` with a `1/B^2`
/// weight, and indexes the radius by the batch count.
pub fn cs_track(trajectory: &Trajectory, pair: (usize, usize), params: CsParams) -> Result<ConfidenceSequenceTrack> {
    let contrib = contributions(trajectory, pair)?;
    let batch = trajectory.mode.batch_size();
    if batch == 0 {
        return Err(MadError::invalid("mode.batch_size", "must be positive"));
    }
    let mut points = Vec::with_capacity(contrib.len().div_ceil(batch));
    let (mut tau_sum, mut s_hat, mut units) = (0.0, 0.0, 0);
    for (j, chunk) in contrib.chunks(batch).enumerate() {
        let h = chunk.len() as f64;
        let (tau, sigma2) = chunk.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
        tau_sum += tau / h;
        s_hat += sigma2 / (h * h);
        units += chunk.len();
        let b = j as u64 + 1;
        points.push(CsPoint {
            t: units,
            center: tau_sum / b as f64,
            radius: asymptotic_radius(s_hat, b, params.eta, params.alpha),
            s_hat,
        });
    }
    Ok(ConfidenceSequenceTrack {
        pair,
        params,
        batch_size: batch,
        points,
    })
}

/// One CS per treatment arm against `control`, each computed on its own.
pub fn pairwise_tracks(
    trajectory: &Trajectory,
    control: usize,
    params: CsParams,
) -> Result<BTreeMap<usize, ConfidenceSequenceTrack>> {
    check_arm(control, trajectory.n_arms)?;
    (0..trajectory.n_arms)
        .filter(|&w| w != control)
        .map(|w| Ok((w, cs_track(trajectory, (w, control), params)?)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonAsymptoticPoint {
    pub t: usize,
    pub center: f64,
    /// `V_t = sum_{i<=t} (tau_hat_i - running_mean_i)^2`.
    pub intrinsic_time: f64,
    pub radius: f64,
}

/// Exact (nonasymptotic) CS `center ± u(V_t)/t`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonAsymptoticTrack {
    pub pair: (usize, usize),
    pub alpha: f64,
    pub boundary: Boundary,
    pub points: Vec<NonAsymptoticPoint>,
    /// Smallest recorded probability of either arm in the pair. Validity of
    /// the boundary assumes this stays bounded away from zero.
    pub min_probability: f64,
}

impl NonAsymptoticTrack {
    pub fn stopping_time(&self) -> StoppingReport {
        let stop_index = stopping_index(self.points.iter().map(|p| (p.center, p.radius)));
        StoppingReport {
            stop_index,
            stop_time: stop_index.map(|i| self.points[i - 1].t),
            rule: "first t with 0 outside center ± u(V_t)/t".into(),
        }
    }
}

/// Nonasymptotic CS for the contrast `pair` with the given boundary.
pub fn nonasymptotic_track(
    trajectory: &Trajectory,
    pair: (usize, usize),
    alpha: f64,
    boundary: Boundary,
) -> Result<NonAsymptoticTrack> {
    boundary.validate()?;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MadError::invalid("alpha", format!("must lie in (0, 1), got {alpha}")));
    }
    if trajectory.mode != Mode::PerUnit {
        return Err(MadError::invalid("mode", "the nonasymptotic CS is defined for per-unit assignment"));
    }
    let contrib = contributions(trajectory, pair)?;
    let min_probability = trajectory
        .steps
        .iter()
        .map(|s| s.mixed[pair.0].min(s.mixed[pair.1]))
        .fold(f64::INFINITY, f64::min);
    let (mut sum, mut v) = (0.0, 0.0);
    let points = contrib
        .iter()
        .enumerate()
        .map(|(i, &(tau, _))| {
            let t = i + 1;
            sum += tau;
            let center = sum / t as f64;
            v += (tau - center).powi(2);
            NonAsymptoticPoint {
                t,
                center,
                intrinsic_time: v,
                radius: boundary.evaluate(v, alpha) / t as f64,
            }
        })
        .collect();
    Ok(NonAsymptoticTrack {
        pair,
        alpha,
        boundary,
        points,
        min_probability,
    })
}
