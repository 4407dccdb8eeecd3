//! The mixture adaptive design.
//!
//! At every step (or batch) the policy's probabilities are mixed with the
//! uniform design, `p_mad(w) = delta/K + (1 - delta) p_policy(w)`, and one
//! categorical draw from the mixture picks the arm. The mixture is what gets
//! recorded for inverse-propensity weighting.

use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{MadError, Result};
use crate::inference::IpwAccumulator;
use crate::outcome::PotentialOutcomeTable;
use crate::policy::{AssignmentDistribution, PolicyKind, PolicyState};
use crate::rng::{stream, Stream, StreamRng};

/// Exploration weight `delta_t` as a function of the (1-based) step index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeltaSchedule {
    /// `1 / t^a`
    Power { a: f64 },
    Constant { c: f64 },
    /// `max(1 / t^a, c)`: adaptive first, then a constant exploration floor.
    ClippedMax { a: f64, c: f64 },
    /// `min(1 / t^a, c)`: constant exploration first, then adaptive.
    ClippedMin { a: f64, c: f64 },
}

impl DeltaSchedule {
    pub fn validate(&self) -> Result<()> {
        let check_a = |a: f64| {
            if a.is_finite() && a >= 0.0 {
                Ok(())
            } else {
                Err(MadError::invalid("a", format!("exponent must be >= 0, got {a}")))
            }
        };
        let check_c = |c: f64| {
            if c > 0.0 && c <= 1.0 {
                Ok(())
            } else {
                Err(MadError::invalid("c", format!("must lie in (0, 1], got {c}")))
            }
        };
        match *self {
            DeltaSchedule::Power { a } => check_a(a),
            DeltaSchedule::Constant { c } => check_c(c),
            DeltaSchedule::ClippedMax { a, c } | DeltaSchedule::ClippedMin { a, c } => {
                check_a(a)?;
                check_c(c)
            }
        }
    }

    pub fn evaluate(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(MadError::invalid("t", "schedules are indexed from 1"));
        }
        self.validate()?;
        let power = |a: f64| (t as f64).powf(-a);
        Ok(match *self {
            DeltaSchedule::Power { a } => power(a),
            DeltaSchedule::Constant { c } => c,
            DeltaSchedule::ClippedMax { a, c } => power(a).max(c),
            DeltaSchedule::ClippedMin { a, c } => power(a).min(c),
        })
    }

    /// The smallest value the schedule can take over `1..=horizon`.
    pub fn floor(&self, horizon: u64) -> Result<f64> {
        // Every kind is monotone in t.
        Ok(self.evaluate(1)?.min(self.evaluate(horizon.max(1))?))
    }
}

/// Mix a policy distribution with the uniform design.
pub fn mix(delta: f64, policy_probs: &AssignmentDistribution) -> Result<AssignmentDistribution> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(MadError::invalid("delta", format!("must lie in (0, 1], got {delta}")));
    }
    let k = policy_probs.n_arms() as f64;
    AssignmentDistribution::new(
        policy_probs
            .probs()
            .iter()
            .map(|&p| delta / k + (1.0 - delta) * p)
            .collect(),
    )
}

/// An assignment design. `StandardBandit` bypasses the mixture entirely and
/// exists only as the (invalid) baseline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignKind {
    /// `delta = 1`: uniform assignment.
    Bernoulli,
    /// `delta = 0`: assign straight from the policy.
    StandardBandit,
    Mad { schedule: DeltaSchedule },
}

impl DesignKind {
    pub fn validate(&self) -> Result<()> {
        match self {
            DesignKind::Mad { schedule } => schedule.validate().map_err(|e| e.within("schedule")),
            _ => Ok(()),
        }
    }

    /// Smallest probability any arm can receive over `1..=horizon`, when the
    /// design guarantees one.
    pub fn min_arm_probability(&self, n_arms: usize, horizon: u64) -> Option<f64> {
        match self {
            DesignKind::Bernoulli => Some(1.0 / n_arms as f64),
            DesignKind::StandardBandit => None,
            DesignKind::Mad { schedule } => schedule.floor(horizon).ok().map(|d| d / n_arms as f64),
        }
    }
}

/// A design with the label used in every output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub label: String,
    #[serde(flatten)]
    pub kind: DesignKind,
}

impl Design {
    pub fn bernoulli() -> Self {
        Design { label: "bernoulli".into(), kind: DesignKind::Bernoulli }
    }

    pub fn standard_bandit() -> Self {
        Design { label: "standard_bandit".into(), kind: DesignKind::StandardBandit }
    }

    pub fn mad(label: impl Into<String>, schedule: DeltaSchedule) -> Self {
        Design { label: label.into(), kind: DesignKind::Mad { schedule } }
    }
}

/// How often assignment probabilities are refreshed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mode {
    #[default]
    PerUnit,
    /// Probabilities are frozen for `batch_size` consecutive units and the
    /// schedule is indexed by batch.
    Batched { batch_size: usize },
}

impl Mode {
    pub fn batch_size(&self) -> usize {
        match *self {
            Mode::PerUnit => 1,
            Mode::Batched { batch_size } => batch_size,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Mode::Batched { batch_size: 0 } => Err(MadError::invalid("batch_size", "must be positive")),
            _ => Ok(()),
        }
    }
}

/// One assigned unit.
#[derive(Debug, Clone, PartialEq)]
pub struct MadStep {
    /// The distribution the arm was drawn from.
    pub mixed: AssignmentDistribution,
    pub raw_policy: AssignmentDistribution,
    /// 0 for the standard-bandit baseline.
    pub delta: f64,
    pub chosen_arm: usize,
    pub observed_outcome: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub steps: Vec<MadStep>,
    /// Fingerprint of the potential-outcome table the trajectory was run on.
    pub table_id: u64,
    pub design: String,
    pub seed: u64,
    pub mode: Mode,
    pub n_arms: usize,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn observed(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.observed_outcome)
    }

    /// One row per unit: `t, arm, outcome, p0 .. p{K-1}, delta`.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string(), "arm".into(), "outcome".into()];
        header.extend((0..self.n_arms).map(|k| format!("p{k}")));
        header.push("delta".into());
        w.write_record(&header)?;
        for (i, step) in self.steps.iter().enumerate() {
            let mut row = vec![(i + 1).to_string(), step.chosen_arm.to_string(), step.observed_outcome.to_string()];
            row.extend(step.mixed.probs().iter().map(|p| p.to_string()));
            row.push(step.delta.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn table_fingerprint(table: &PotentialOutcomeTable) -> u64 {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    table.n_arms().hash(&mut h);
    for i in 0..table.n_units() {
        for v in table.row(i) {
            v.to_bits().hash(&mut h);
        }
    }
    h.finish()
}

/// Everything that determines a trajectory besides the table and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub policy: PolicyKind,
    pub design: Design,
    pub mode: Mode,
    pub mc_draws: usize,
}

fn assignment_for(
    design: &DesignKind,
    policy: &PolicyState,
    index: u64,
    mc_draws: usize,
    policy_rng: &mut StreamRng,
) -> Result<(AssignmentDistribution, AssignmentDistribution, f64)> {
    let k = policy.n_arms();
    Ok(match design {
        DesignKind::Bernoulli => {
            let uniform = AssignmentDistribution::uniform(k);
            (uniform.clone(), uniform, 1.0)
        }
        DesignKind::StandardBandit => {
            let raw = policy.probs(mc_draws, policy_rng);
            (raw.clone(), raw, 0.0)
        }
        DesignKind::Mad { schedule } => {
            let delta = schedule.evaluate(index)?;
            let raw = policy.probs(mc_draws, policy_rng);
            (mix(delta, &raw)?, raw, delta)
        }
    })
}

/// Run one design over a potential-outcome table.
///
/// In batched mode the mixture is computed once per batch from the policy
/// state after all earlier batches, with the schedule evaluated at the batch
/// index. Per-unit mode is batched mode with batch size 1.
pub fn run_trajectory(table: &PotentialOutcomeTable, config: &TrajectoryConfig, seed: u64) -> Result<Trajectory> {
    config.mode.validate()?;
    config.design.kind.validate()?;
    let k = table.n_arms();
    let n = table.n_units();
    let mut policy = PolicyState::new(config.policy, k)?;
    let mut assign_rng = stream(seed, Stream::Assignment);
    let mut policy_rng = stream(seed, Stream::Policy);
    let batch = config.mode.batch_size();
    let learns = config.design.kind != DesignKind::Bernoulli;

    let mut steps = Vec::with_capacity(n);
    for (j, start) in (0..n).step_by(batch).enumerate() {
        let (mixed, raw, delta) = assignment_for(&config.design.kind, &policy, j as u64 + 1, config.mc_draws, &mut policy_rng)?;
        let end = (start + batch).min(n);
        for i in start..end {
            let arm = mixed.sample(&mut assign_rng);
            steps.push(MadStep {
                mixed: mixed.clone(),
                raw_policy: raw.clone(),
                delta,
                chosen_arm: arm,
                observed_outcome: table.get(i, arm),
            });
        }
        if learns {
            for step in &steps[start..end] {
                policy.update(step.chosen_arm, step.observed_outcome)?;
            }
        }
    }
    Ok(Trajectory {
        steps,
        table_id: table_fingerprint(table),
        design: config.design.label.clone(),
        seed,
        mode: config.mode,
        n_arms: k,
    })
}

/// An arm handed out by a [`Session`], with the probability it was drawn with.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub arm: usize,
    pub probs: AssignmentDistribution,
}

/// Online, per-unit MAD for live experiments: ask for an arm, report the
/// outcome, query the confidence sequence at any time.
#[derive(Debug, Clone)]
pub struct Session {
    policy: PolicyState,
    design: DesignKind,
    mc_draws: usize,
    assign_rng: StreamRng,
    policy_rng: StreamRng,
    pending: Option<Assignment>,
    ipw: IpwAccumulator,
}

impl Session {
    pub fn new(n_arms: usize, policy: PolicyKind, design: DesignKind, mc_draws: usize, seed: u64) -> Result<Self> {
        design.validate()?;
        Ok(Session {
            policy: PolicyState::new(policy, n_arms)?,
            design,
            mc_draws,
            assign_rng: stream(seed, Stream::Assignment),
            policy_rng: stream(seed, Stream::Policy),
            pending: None,
            ipw: IpwAccumulator::new(n_arms),
        })
    }

    pub fn n_arms(&self) -> usize {
        self.policy.n_arms()
    }

    /// Units whose outcomes have been observed.
    pub fn observed_units(&self) -> u64 {
        self.ipw.units()
    }

    /// Draw the arm for the next unit. Calling again before [`Session::observe`]
    /// returns the same pending assignment.
    pub fn assign(&mut self) -> Result<Assignment> {
        if let Some(pending) = &self.pending {
            return Ok(pending.clone());
        }
        let index = self.ipw.units() + 1;
        let (mixed, _, _) = assignment_for(&self.design, &self.policy, index, self.mc_draws, &mut self.policy_rng)?;
        let arm = mixed.sample(&mut self.assign_rng);
        let assignment = Assignment { arm, probs: mixed };
        self.pending = Some(assignment.clone());
        Ok(assignment)
    }

    /// Record the outcome of the pending assignment.
    pub fn observe(&mut self, outcome: f64) -> Result<()> {
        let Some(pending) = self.pending.take() else {
            return Err(MadError::InvariantViolation("observe called without a pending assignment".into()));
        };
        if !outcome.is_finite() {
            self.pending = Some(pending);
            return Err(MadError::Domain(format!("outcome must be finite, got {outcome}")));
        }
        if self.design != DesignKind::Bernoulli {
            if let Err(e) = self.policy.update(pending.arm, outcome) {
                self.pending = Some(pending);
                return Err(e);
            }
        }
        self.ipw.push(pending.arm, outcome, &pending.probs)
    }

    pub fn ipw(&self) -> &IpwAccumulator {
        &self.ipw
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::outcome::{generate_table, OutcomeModelSpec};
    use crate::policy::AssignmentDistribution as Dist;
    use proptest::prelude::*;
    use rand::Rng;

    fn config(policy: PolicyKind, design: Design, mode: Mode) -> TrajectoryConfig {
        TrajectoryConfig { policy, design, mode, mc_draws: 1000 }
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(DeltaSchedule::Power { a: 0.24 }.evaluate(1).unwrap(), 1.0);
        let clipped = DeltaSchedule::ClippedMax { a: 0.24, c: 0.2 };
        assert_eq!(clipped.evaluate(1_000_000).unwrap(), 0.2);
        // 10^(-6 * 0.24), scalar oracle.
        let raw = DeltaSchedule::Power { a: 0.24 }.evaluate(1_000_000).unwrap();
        assert!((raw - 0.036_307_805_477_010_13).abs() < 1e-15);
        assert_eq!(DeltaSchedule::Constant { c: 0.2 }.evaluate(12345).unwrap(), 0.2);
        assert_eq!(DeltaSchedule::ClippedMin { a: 0.24, c: 0.2 }.evaluate(1).unwrap(), 0.2);
        assert!(DeltaSchedule::Power { a: 0.24 }.evaluate(0).is_err());
        let err = DeltaSchedule::Power { a: -1.0 }.validate().unwrap_err();
        assert!(err.to_string().contains("`a`"));
        assert!(DeltaSchedule::Constant { c: 0.0 }.validate().is_err());
    }

    #[test]
    fn mix_examples() {
        let any = Dist::new(vec![0.1, 0.9]).unwrap();
        assert_eq!(mix(1.0, &any).unwrap().probs(), &[0.5, 0.5]);
        let half = mix(0.5, &any).unwrap();
        assert!((half[0] - 0.30).abs() < 1e-15 && (half[1] - 0.70).abs() < 1e-15);
        let ucb = mix(0.6, &Dist::one_hot(2, 1)).unwrap();
        assert!((ucb[0] - 0.30).abs() < 1e-15 && (ucb[1] - 0.70).abs() < 1e-15);
        assert!(mix(0.0, &any).is_err());
        assert!(mix(1.5, &any).is_err());
    }

    #[test]
    fn bernoulli_design_frequency() {
        let table = generate_table(&OutcomeModelSpec::bernoulli(&[0.2, 0.8]), 10_000, 1).unwrap();
        let cfg = config(PolicyKind::BetaThompson, Design::mad("bern", DeltaSchedule::Constant { c: 1.0 }), Mode::PerUnit);
        let traj = run_trajectory(&table, &cfg, 9).unwrap();
        let freq = traj.steps.iter().filter(|s| s.chosen_arm == 1).count() as f64 / 1e4;
        assert!((freq - 0.5).abs() < 0.02, "{freq}");
    }

    #[test]
    fn batch_of_one_is_per_unit() {
        let table = generate_table(&OutcomeModelSpec::bernoulli(&[0.3, 0.6]), 2000, 4).unwrap();
        let design = Design::mad("unclipped", DeltaSchedule::Power { a: 0.24 });
        let a = run_trajectory(&table, &config(PolicyKind::BetaThompson, design.clone(), Mode::PerUnit), 17).unwrap();
        let mut b = run_trajectory(&table, &config(PolicyKind::BetaThompson, design, Mode::Batched { batch_size: 1 }), 17).unwrap();
        b.mode = Mode::PerUnit;
        assert_eq!(a, b);
    }

    #[test]
    fn batches_freeze_probabilities() {
        let table = generate_table(&OutcomeModelSpec::bernoulli(&[0.3, 0.6]), 1000, 4).unwrap();
        let cfg = config(PolicyKind::BetaThompson, Design::mad("m", DeltaSchedule::Power { a: 0.24 }), Mode::Batched { batch_size: 50 });
        let traj = run_trajectory(&table, &cfg, 2).unwrap();
        for chunk in traj.steps.chunks(50) {
            assert!(chunk.iter().all(|s| s.mixed == chunk[0].mixed && s.delta == chunk[0].delta));
        }
        // Schedule indexed by batch: third batch uses 3^-0.24.
        assert!((traj.steps[100].delta - 3f64.powf(-0.24)).abs() < 1e-15);
    }

    #[test]
    fn ucb_clipped_lower_bound() {
        let table = generate_table(&OutcomeModelSpec::bernoulli(&[0.2, 0.8]), 5000, 8).unwrap();
        let cfg = config(PolicyKind::Ucb1, Design::mad("clipped", DeltaSchedule::ClippedMax { a: 0.24, c: 0.2 }), Mode::PerUnit);
        let traj = run_trajectory(&table, &cfg, 3).unwrap();
        for step in &traj.steps {
            assert!(step.mixed.probs().iter().all(|&p| p >= 0.1 - 1e-15));
        }
    }

    #[test]
    fn steps_satisfy_mixture_identity_and_consistency() {
        let table = generate_table(&OutcomeModelSpec::bernoulli(&[0.4, 0.6, 0.5]), 3000, 12).unwrap();
        let cfg = config(PolicyKind::BetaThompson, Design::mad("m", DeltaSchedule::Power { a: 0.24 }), Mode::PerUnit);
        let traj = run_trajectory(&table, &cfg, 5).unwrap();
        for (i, s) in traj.steps.iter().enumerate() {
            assert_eq!(s.observed_outcome, table.get(i, s.chosen_arm));
            for w in 0..3 {
                let expected = s.delta / 3.0 + (1.0 - s.delta) * s.raw_policy[w];
                assert!((s.mixed[w] - expected).abs() < 1e-12);
                assert!(s.mixed[w] >= s.delta / 3.0 - 1e-15);
            }
        }
        assert_eq!(traj, run_trajectory(&table, &cfg, 5).unwrap());
    }

    #[test]
    fn regret_decomposition_at_a_frozen_step() {
        // Frozen TS state, constant delta: E[Y_obs | MAD] equals
        // delta * mean(arm means) + (1 - delta) * E[Y_obs | policy].
        let means = [0.2, 0.8];
        let mut state = PolicyState::new(PolicyKind::BetaThompson, 2).unwrap();
        for (arm, y) in [(1, 1.0), (1, 1.0), (0, 0.0), (1, 0.0)] {
            state.update(arm, y).unwrap();
        }
        let mut rng = stream(77, Stream::Assignment);
        let raw = state.probs(1, &mut rng);
        let delta = 0.5;
        let mixed = mix(delta, &raw).unwrap();
        let draws = 100_000;
        let rewards: Vec<f64> = (0..draws)
            .map(|_| {
                let arm = mixed.sample(&mut rng);
                if rng.gen::<f64>() < means[arm] { 1.0 } else { 0.0 }
            })
            .collect();
        let mean = rewards.iter().sum::<f64>() / draws as f64;
        let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let se = (var / draws as f64).sqrt();
        let policy_reward = raw[0] * means[0] + raw[1] * means[1];
        let expected = delta * 0.5 * (means[0] + means[1]) + (1.0 - delta) * policy_reward;
        assert!((mean - expected).abs() <= 3.0 * se, "{mean} vs {expected} (se {se})");
    }

    #[test]
    fn session_matches_trajectory_estimates() {
        let table = generate_table(&OutcomeModelSpec::bernoulli(&[0.3, 0.7]), 500, 6).unwrap();
        let cfg = config(PolicyKind::BetaThompson, Design::mad("m", DeltaSchedule::Power { a: 0.24 }), Mode::PerUnit);
        let traj = run_trajectory(&table, &cfg, 21).unwrap();
        let mut session = Session::new(2, PolicyKind::BetaThompson, cfg.design.kind, 1000, 21).unwrap();
        for (i, step) in traj.steps.iter().enumerate() {
            let a = session.assign().unwrap();
            assert_eq!(a.arm, step.chosen_arm);
            assert_eq!(a.probs, step.mixed);
            session.observe(table.get(i, a.arm)).unwrap();
        }
        assert_eq!(session.observed_units(), 500);
        assert!(session.observe(1.0).is_err());
    }

    #[test]
    fn trajectory_csv_rows() {
        let table = generate_table(&OutcomeModelSpec::bernoulli(&[0.3, 0.7]), 20, 1).unwrap();
        let cfg = config(PolicyKind::Ucb1, Design::mad("m", DeltaSchedule::Constant { c: 0.5 }), Mode::PerUnit);
        let traj = run_trajectory(&table, &cfg, 2).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "t,arm,outcome,p0,p1,delta");
        assert_eq!(lines.len(), 21);
        let last: Vec<f64> = lines[20].split(',').map(|x| x.parse().unwrap()).collect();
        assert_eq!(last[0], 20.0);
        assert_eq!(last[5], 0.5);
        assert!((last[3] + last[4] - 1.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn mix_preserves_simplex_and_floor(
            delta in 1e-6f64..=1.0,
            raw in proptest::collection::vec(0.0f64..1.0, 2..6),
        ) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-9);
            let probs = Dist::new(raw.iter().map(|x| x / total).collect()).unwrap();
            let mixed = mix(delta, &probs).unwrap();
            let k = probs.n_arms() as f64;
            prop_assert!((mixed.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(mixed.probs().iter().all(|&p| p >= delta / k - 1e-15));
        }
    }
}
