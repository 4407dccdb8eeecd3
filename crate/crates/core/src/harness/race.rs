//! MAD vs Bernoulli under the "stop once zero leaves the CS" rule.

use rayon::prelude::*;
use serde::Serialize;

use super::{with_pool, ExperimentPreset, MetricPoint, RunningStat};
use crate::design::{run_trajectory, DeltaSchedule, Design, Mode, TrajectoryConfig};
use crate::error::{MadError, Result};
use crate::inference::{cs_track, CsParams, IpwAccumulator};
use crate::outcome::{generate_table, OutcomeModelSpec, PotentialOutcomeTable};
use crate::policy::PolicyKind;

/// One replicate of the race.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RaceReplicate {
    pub replicate: usize,
    pub seed: u64,
    pub mad_stop: Option<usize>,
    pub bernoulli_stop: Option<usize>,
    /// MAD stop time, or the horizon.
    pub truncation: usize,
    /// Arm Bernoulli commits to after stopping.
    pub bernoulli_arm: Option<usize>,
    /// Cumulative average reward for `t = 1..=truncation`.
    #[serde(skip)]
    pub mad_reward: Vec<f64>,
    #[serde(skip)]
    pub bernoulli_reward: Vec<f64>,
}

impl RaceReplicate {
    /// `mad_stop - bernoulli_stop` when both stopped.
    pub fn stop_gap(&self) -> Option<i64> {
        Some(self.mad_stop? as i64 - self.bernoulli_stop? as i64)
    }

    pub fn final_rewards(&self) -> (f64, f64) {
        (
            self.mad_reward.last().copied().unwrap_or(0.0),
            self.bernoulli_reward.last().copied().unwrap_or(0.0),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingRaceResult {
    pub setting: String,
    pub horizon: usize,
    pub replicates: Vec<RaceReplicate>,
}

impl StoppingRaceResult {
    /// Median of the stop gaps over replicates where both designs stopped.
    pub fn median_gap(&self) -> Option<f64> {
        let mut gaps: Vec<i64> = self.replicates.iter().filter_map(RaceReplicate::stop_gap).collect();
        if gaps.is_empty() {
            return None;
        }
        gaps.sort_unstable();
        let n = gaps.len();
        Some(if n % 2 == 1 {
            gaps[n / 2] as f64
        } else {
            (gaps[n / 2 - 1] + gaps[n / 2]) as f64 / 2.0
        })
    }

    /// Mean reward at truncation: `(mad, bernoulli)`.
    pub fn mean_final_rewards(&self) -> (RunningStat, RunningStat) {
        let mut mad = RunningStat::default();
        let mut bern = RunningStat::default();
        for r in &self.replicates {
            let (m, b) = r.final_rewards();
            mad.push(m);
            bern.push(b);
        }
        (mad, bern)
    }

    /// Mean reward curves over the replicates still running at each `t`.
    pub fn reward_curves(&self) -> (Vec<MetricPoint>, Vec<MetricPoint>) {
        let (mad, bern) = self.reward_stats();
        let points = |v: Vec<RunningStat>| v.iter().map(RunningStat::point).collect();
        (points(mad), points(bern))
    }

    pub(crate) fn reward_stats(&self) -> (Vec<RunningStat>, Vec<RunningStat>) {
        let mut mad = vec![RunningStat::default(); self.horizon];
        let mut bern = vec![RunningStat::default(); self.horizon];
        for r in &self.replicates {
            for (s, &x) in mad.iter_mut().zip(&r.mad_reward) {
                s.push(x);
            }
            for (s, &x) in bern.iter_mut().zip(&r.bernoulli_reward) {
                s.push(x);
            }
        }
        let len = mad.iter().take_while(|s| s.n() > 0).count();
        mad.truncate(len);
        bern.truncate(len);
        (mad, bern)
    }
}

fn cumulative_average(rewards: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut sum = 0.0;
    rewards
        .enumerate()
        .map(|(i, y)| {
            sum += y;
            sum / (i + 1) as f64
        })
        .collect()
}

/// Race on a given table.
pub fn race_on_table(
    table: &PotentialOutcomeTable,
    schedule: DeltaSchedule,
    policy: PolicyKind,
    params: CsParams,
    replicate: usize,
    seed: u64,
) -> Result<RaceReplicate> {
    if table.n_arms() != 2 {
        return Err(MadError::invalid("settings", "the stopping race is defined for two arms"));
    }
    let horizon = table.n_units();
    let run = |design: Design| {
        let config = TrajectoryConfig { policy, design, mode: Mode::PerUnit, mc_draws: 1000 };
        run_trajectory(table, &config, seed)
    };
    let mad = run(Design::mad("mad", schedule))?;
    let bern = run(Design::bernoulli())?;
    let mad_stop = cs_track(&mad, (1, 0), params)?.stopping_time().stop_time;
    let bernoulli_stop = cs_track(&bern, (1, 0), params)?.stopping_time().stop_time;
    let truncation = mad_stop.unwrap_or(horizon);

    let bernoulli_arm = match bernoulli_stop {
        Some(s) => {
            let mut acc = IpwAccumulator::new(2);
            for step in &bern.steps[..s] {
                acc.push(step.chosen_arm, step.observed_outcome, &step.mixed)?;
            }
            Some(if acc.arm_mean(1) > acc.arm_mean(0) { 1 } else { 0 })
        }
        None => None,
    };
    let bern_rewards = (0..truncation).map(|i| match (bernoulli_stop, bernoulli_arm) {
        (Some(s), Some(arm)) if i >= s => table.get(i, arm),
        _ => bern.steps[i].observed_outcome,
    });
    Ok(RaceReplicate {
        replicate,
        seed,
        mad_stop,
        bernoulli_stop,
        truncation,
        bernoulli_arm,
        mad_reward: cumulative_average(mad.observed().take(truncation)),
        bernoulli_reward: cumulative_average(bern_rewards),
    })
}

/// Run `replicates` races; replicate `r` draws its table from seed `base_seed + r`.
#[allow(clippy::too_many_arguments)]
pub fn run_stopping_race(
    outcome: &OutcomeModelSpec,
    schedule: DeltaSchedule,
    policy: PolicyKind,
    replicates: usize,
    horizon: usize,
    base_seed: u64,
    params: CsParams,
    jobs: usize,
) -> Result<StoppingRaceResult> {
    if replicates == 0 {
        return Err(MadError::invalid("replicates", "must be at least 1"));
    }
    outcome.validate(horizon)?;
    schedule.validate().map_err(|e| e.within("schedule"))?;
    let results: Vec<Result<RaceReplicate>> = with_pool(jobs, || {
        (0..replicates)
            .into_par_iter()
            .map(|r| {
                let seed = ExperimentPreset::seed_for(base_seed, r);
                let table = generate_table(outcome, horizon, seed)?;
                race_on_table(&table, schedule, policy, params, r, seed)
            })
            .collect()
    })?;
    Ok(StoppingRaceResult {
        setting: String::new(),
        horizon,
        replicates: results.into_iter().collect::<Result<_>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_table_both_stop_and_mad_earns_more() {
        let rows: Vec<Vec<f64>> = (0..2000).map(|_| vec![0.0, 1.0]).collect();
        let table = PotentialOutcomeTable::from_rows(&rows).unwrap();
        let params = CsParams::for_horizon(0.05, 2000).unwrap();
        for seed in 0..5 {
            let r = race_on_table(&table, DeltaSchedule::Power { a: 0.24 }, PolicyKind::Ucb1, params, 0, seed).unwrap();
            assert!(r.mad_stop.is_some() && r.bernoulli_stop.is_some());
            let (m, b) = r.final_rewards();
            assert!(m >= b, "mad {m} bernoulli {b}");
            assert_eq!(r.mad_reward.len(), r.truncation);
            assert_eq!(r.bernoulli_reward.len(), r.truncation);
            if r.bernoulli_stop.unwrap() < r.truncation {
                assert_eq!(r.bernoulli_arm, Some(1));
            }
        }
    }

    #[test]
    fn race_is_deterministic_and_median_works() {
        let spec = OutcomeModelSpec::bernoulli(&[0.2, 0.8]);
        let params = CsParams::for_horizon(0.05, 1000).unwrap();
        let run = |jobs| run_stopping_race(&spec, DeltaSchedule::Power { a: 0.24 }, PolicyKind::Ucb1, 6, 1000, 9, params, jobs).unwrap();
        let a = run(1);
        assert_eq!(a, run(4));
        let (mad, bern) = a.reward_curves();
        assert_eq!(mad.len(), bern.len());
        let res = StoppingRaceResult {
            setting: String::new(),
            horizon: 1,
            replicates: [(5, 3), (4, 4), (10, 2), (1, 1)]
                .iter()
                .map(|&(m, b)| RaceReplicate {
                    replicate: 0,
                    seed: 0,
                    mad_stop: Some(m),
                    bernoulli_stop: Some(b),
                    truncation: m,
                    bernoulli_arm: None,
                    mad_reward: vec![],
                    bernoulli_reward: vec![],
                })
                .collect(),
        };
        assert_eq!(res.median_gap(), Some(1.0));
    }
}
