//! Underlying adaptive assignment algorithms.
//!
//! A policy exposes its current assignment probabilities and absorbs observed
//! outcomes. The MAD mixes those probabilities with a uniform design before
//! any arm is drawn.

use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;
use statrs::function::erf::erfc;

use crate::error::{check_arm, MadError, Result};

/// Tolerance for the simplex constructor. Monte Carlo frequencies and the
/// mixture are both accurate far beyond this.
const SIMPLEX_TOL: f64 = 1e-9;

/// A probability vector over the K arms.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentDistribution(Vec<f64>);

impl AssignmentDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.len() < 2 {
            return Err(MadError::invalid("probs", "need at least two arms"));
        }
        if let Some(i) = probs.iter().position(|p| !(p.is_finite() && *p >= 0.0 && *p <= 1.0 + SIMPLEX_TOL)) {
            return Err(MadError::invalid(format!("probs[{i}]"), format!("not a probability: {}", probs[i])));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(MadError::invalid("probs", format!("entries sum to {total}, not 1")));
        }
        Ok(AssignmentDistribution(probs))
    }

    pub fn uniform(k: usize) -> Self {
        AssignmentDistribution(vec![1.0 / k as f64; k])
    }

    pub fn one_hot(k: usize, arm: usize) -> Self {
        let mut p = vec![0.0; k];
        p[arm] = 1.0;
        AssignmentDistribution(p)
    }

    pub fn n_arms(&self) -> usize {
        self.0.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn get(&self, arm: usize) -> f64 {
        self.0[arm]
    }

    /// Categorical draw from a single uniform `u` in `[0, 1)`. Arms with zero
    /// probability are never returned.
    pub fn sample_with(&self, u: f64) -> usize {
        let total: f64 = self.0.iter().sum();
        let target = u * total;
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (w, &p) in self.0.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last_positive = w;
            if target < acc {
                return w;
            }
        }
        last_positive
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sample_with(rng.gen::<f64>())
    }
}

impl std::ops::Index<usize> for AssignmentDistribution {
    type Output = f64;
    fn index(&self, arm: usize) -> &f64 {
        &self.0[arm]
    }
}

/// Which adaptive algorithm to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    /// Uniform assignment (the Bernoulli design as a policy).
    Uniform,
    /// Beta-Bernoulli Thompson sampling with Beta(1, 1) priors.
    BetaThompson,
    /// Gaussian Thompson sampling with N(0, 1) priors and unit noise.
    GaussianThompson,
    Ucb1,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Uniform => "uniform",
            PolicyKind::BetaThompson => "beta_thompson",
            PolicyKind::GaussianThompson => "gaussian_thompson",
            PolicyKind::Ucb1 => "ucb1",
        }
    }
}

/// Per-arm sufficient statistics of a policy.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyState {
    kind: PolicyKind,
    counts: Vec<u64>,
    /// Outcome sums (UCB1, Gaussian TS) or successes (Beta TS).
    sums: Vec<f64>,
    steps: u64,
}

impl PolicyState {
    pub fn new(kind: PolicyKind, n_arms: usize) -> Result<Self> {
        if n_arms < 2 {
            return Err(MadError::invalid("n_arms", "need at least two arms"));
        }
        Ok(PolicyState {
            kind,
            counts: vec![0; n_arms],
            sums: vec![0.0; n_arms],
            steps: 0,
        })
    }

    pub fn kind(&self) -> PolicyKind {
        self.kind
    }

    pub fn n_arms(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    /// Number of updates absorbed so far.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Beta posterior `(alpha, beta)` of an arm under Beta TS.
    pub fn beta_params(&self, arm: usize) -> (f64, f64) {
        let successes = self.sums[arm];
        (1.0 + successes, 1.0 + self.counts[arm] as f64 - successes)
    }

    /// Gaussian posterior `(mean, variance)` of an arm under N(0,1) prior and
    /// unit observation noise.
    pub fn gaussian_posterior(&self, arm: usize) -> (f64, f64) {
        let precision = 1.0 + self.counts[arm] as f64;
        (self.sums[arm] / precision, 1.0 / precision)
    }

    /// Assignment probabilities for the next unit. Closed forms are used for
    /// two-armed Thompson sampling; otherwise `mc_draws` joint posterior draws
    /// are taken from `rng`.
    pub fn probs<R: Rng + ?Sized>(&self, mc_draws: usize, rng: &mut R) -> AssignmentDistribution {
        let k = self.n_arms();
        match self.kind {
            PolicyKind::Uniform => AssignmentDistribution::uniform(k),
            PolicyKind::Ucb1 => AssignmentDistribution::one_hot(k, self.ucb_arm()),
            PolicyKind::BetaThompson if k == 2 => {
                let (a1, b1) = self.beta_params(1);
                let (a0, b0) = self.beta_params(0);
                let p1 = prob_beta_greater(a1, b1, a0, b0);
                AssignmentDistribution(vec![1.0 - p1, p1])
            }
            PolicyKind::GaussianThompson if k == 2 => {
                let (m1, v1) = self.gaussian_posterior(1);
                let (m0, v0) = self.gaussian_posterior(0);
                let p1 = std_normal_cdf((m1 - m0) / (v1 + v0).sqrt());
                AssignmentDistribution(vec![1.0 - p1, p1])
            }
            PolicyKind::BetaThompson | PolicyKind::GaussianThompson => self.probs_monte_carlo(mc_draws, rng),
        }
    }

    /// Monte Carlo frequency of each arm being the posterior argmax. Ties go
    /// to the lowest arm.
    pub fn probs_monte_carlo<R: Rng + ?Sized>(&self, mc_draws: usize, rng: &mut R) -> AssignmentDistribution {
        let k = self.n_arms();
        let draws = mc_draws.max(1);
        let mut wins = vec![0u64; k];
        match self.kind {
            PolicyKind::BetaThompson => {
                let dists: Vec<Beta<f64>> = (0..k)
                    .map(|w| {
                        let (a, b) = self.beta_params(w);
                        Beta::new(a, b).expect("Beta parameters are >= 1")
                    })
                    .collect();
                for _ in 0..draws {
                    wins[argmax(dists.iter().map(|d| d.sample(rng)))] += 1;
                }
            }
            PolicyKind::GaussianThompson => {
                let post: Vec<(f64, f64)> = (0..k).map(|w| self.gaussian_posterior(w)).collect();
                for _ in 0..draws {
                    wins[argmax(post.iter().map(|&(m, v)| {
                        let z: f64 = StandardNormal.sample(rng);
                        m + v.sqrt() * z
                    }))] += 1;
                }
            }
            PolicyKind::Uniform | PolicyKind::Ucb1 => return self.probs(draws, rng),
        }
        AssignmentDistribution(wins.into_iter().map(|c| c as f64 / draws as f64).collect())
    }

    fn ucb_arm(&self) -> usize {
        if let Some(unpulled) = self.counts.iter().position(|&n| n == 0) {
            return unpulled;
        }
        let log_t = (self.steps as f64).ln();
        argmax(
            self.counts
                .iter()
                .zip(&self.sums)
                .map(|(&n, &s)| s / n as f64 + (2.0 * log_t / n as f64).sqrt()),
        )
    }

    /// Absorb one observed outcome.
    pub fn update(&mut self, arm: usize, outcome: f64) -> Result<()> {
        check_arm(arm, self.n_arms())?;
        if self.kind == PolicyKind::BetaThompson && outcome != 0.0 && outcome != 1.0 {
            return Err(MadError::Domain(format!(
                "Beta-Bernoulli Thompson sampling needs 0/1 outcomes, got {outcome}"
            )));
        }
        if !outcome.is_finite() {
            return Err(MadError::Domain(format!("outcome must be finite, got {outcome}")));
        }
        self.counts[arm] += 1;
        self.sums[arm] += outcome;
        self.steps += 1;
        Ok(())
    }
}

fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

pub(crate) fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `P(X > Y)` for independent `X ~ Beta(a1, b1)`, `Y ~ Beta(a0, b0)`, where
/// at least one of `a1`, `a0` is a positive integer.
///
/// Uses the finite sum
/// `sum_{i<a1} B(a0+i, b0+b1) / ((b1+i) B(1+i, b1) B(a0, b0))`, evaluated over
/// whichever of `a1`, `a0` is smaller (the other direction via the
/// complement). Consecutive terms differ by the factor
/// `(a0+i)(b1+i) / ((a0+b0+b1+i)(1+i))`, so only the first term needs special
/// functions.
pub fn prob_beta_greater(a1: f64, b1: f64, a0: f64, b0: f64) -> f64 {
    let a1_int = a1.fract() == 0.0;
    let a0_int = a0.fract() == 0.0;
    if a0_int && (!a1_int || a0 < a1) {
        return (1.0 - beta_greater_sum(a0, b0, a1, b1)).clamp(0.0, 1.0);
    }
    assert!(a1_int, "one of the alpha parameters must be an integer");
    beta_greater_sum(a1, b1, a0, b0).clamp(0.0, 1.0)
}

fn beta_greater_sum(a1: f64, b1: f64, a0: f64, b0: f64) -> f64 {
    const RESCALE: f64 = 1e100;
    let ln_rescale = RESCALE.ln();
    let mut log_scale = ln_beta(a0, b0 + b1) - ln_beta(a0, b0);
    let mut term = 1.0;
    let mut sum = 0.0;
    let n_terms = a1 as u64;
    for i in 0..n_terms {
        let i = i as f64;
        sum += term;
        term *= (a0 + i) * (b1 + i) / ((a0 + b0 + b1 + i) * (1.0 + i));
        if term > RESCALE {
            term /= RESCALE;
            sum /= RESCALE;
            log_scale += ln_rescale;
        }
    }
    sum * log_scale.exp()
}
