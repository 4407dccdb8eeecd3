//! Built-in experiment presets.

use super::{ExperimentKind, ExperimentPreset, Metric, NonAsymptoticBoundary, Setting};
use crate::design::{DeltaSchedule, Design, Mode};
use crate::outcome::{ArmLaws, OutcomeModelSpec};
use crate::policy::PolicyKind;

/// Names of every built-in preset, in catalog order.
pub const NAMES: [&str; 12] = [
    "fig1",
    "fig1_ucb",
    "normal",
    "t",
    "cauchy",
    "nonstat_a",
    "nonstat_b",
    "race_high",
    "race_low",
    "howard_compare",
    "regret_decomp",
    "batched",
];

fn bernoulli_settings() -> Vec<Setting> {
    [(0.5, 0.5), (0.6, 0.8), (0.2, 0.8)]
        .iter()
        .map(|&(p0, p1)| Setting {
            label: format!("p0={p0},p1={p1}"),
            outcome: OutcomeModelSpec::bernoulli(&[p0, p1]),
        })
        .collect()
}

fn fig1_designs() -> Vec<Design> {
    vec![
        Design::bernoulli(),
        Design::standard_bandit(),
        Design::mad("unclipped_mad", DeltaSchedule::Power { a: 0.24 }),
        Design::mad("clipped_mad", DeltaSchedule::ClippedMax { a: 0.24, c: 0.2 }),
    ]
}

fn base(name: &str, description: &str, settings: Vec<Setting>, policy: PolicyKind, designs: Vec<Design>) -> ExperimentPreset {
    ExperimentPreset {
        name: name.into(),
        description: description.into(),
        settings,
        policy,
        mc_draws: 1000,
        designs,
        horizon: 10_000,
        replicates: 100,
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

fn location_settings(family: &str) -> Vec<Setting> {
    [(1.0, 1.0), (1.0, 2.0), (1.0, 4.0)]
        .iter()
        .map(|&(m0, m1)| {
            let mean = vec![m0, m1];
            let laws = match family {
                "normal" => ArmLaws::Normal { mean, scale: 1.0 },
                _ => ArmLaws::Cauchy { mean, scale: 1.0 },
            };
            Setting {
                label: format!("mu0={m0},mu1={m1}"),
                outcome: OutcomeModelSpec::stationary(laws),
            }
        })
        .collect()
}

fn location_designs(a: f64) -> Vec<Design> {
    vec![
        Design::bernoulli(),
        Design::standard_bandit(),
        Design::mad("mad", DeltaSchedule::Power { a }),
    ]
}

fn nonstationary(name: &str, description: &str, after: f64) -> ExperimentPreset {
    let outcome = OutcomeModelSpec::bernoulli(&[0.2, 0.8]).with_changepoint(501, ArmLaws::Bernoulli { p: vec![0.2, after] });
    let mut p = base(
        name,
        description,
        vec![Setting { label: format!("p1=0.8->{after}"), outcome }],
        PolicyKind::Ucb1,
        vec![Design::bernoulli(), Design::mad("mad", DeltaSchedule::Power { a: 0.24 })],
    );
    p.experiment = ExperimentKind::Nonstationary;
    p
}

fn race(name: &str, description: &str, p1: f64) -> ExperimentPreset {
    let mut p = base(
        name,
        description,
        vec![Setting {
            label: format!("p0=0.2,p1={p1}"),
            outcome: OutcomeModelSpec::bernoulli(&[0.2, p1]),
        }],
        PolicyKind::Ucb1,
        vec![Design::bernoulli(), Design::mad("mad", DeltaSchedule::Power { a: 0.24 })],
    );
    p.experiment = ExperimentKind::StoppingRace;
    p
}

/// Look up a preset by name.
pub fn preset(name: &str) -> Option<ExperimentPreset> {
    Some(match name {
        "fig1" => base(
            "fig1",
            "Bernoulli outcomes at ATE 0, 0.2 and 0.6; four designs; Beta Thompson sampling",
            bernoulli_settings(),
            PolicyKind::BetaThompson,
            fig1_designs(),
        ),
        "fig1_ucb" => base(
            "fig1_ucb",
            "fig1 grid with UCB1 as the underlying policy",
            bernoulli_settings(),
            PolicyKind::Ucb1,
            fig1_designs(),
        ),
        "normal" => {
            let mut p = base(
                "normal",
                "Normal outcomes, means (1,1), (1,2), (1,4); Gaussian Thompson sampling",
                location_settings("normal"),
                PolicyKind::GaussianThompson,
                location_designs(0.24),
            );
            p.horizon = 1000;
            p
        }
        "t" => {
            let settings = [3.0, 5.0, 10.0]
                .iter()
                .map(|&df| Setting {
                    label: format!("df={df}"),
                    outcome: OutcomeModelSpec::stationary(ArmLaws::StudentT { mean: vec![1.0, 2.0], scale: 1.0, df }),
                })
                .collect();
            let mut p = base(
                "t",
                "Student-t outcomes, means (1,2), df 3, 5, 10; misspecified Gaussian Thompson sampling, delta = t^-0.2",
                settings,
                PolicyKind::GaussianThompson,
                location_designs(0.2),
            );
            p.horizon = 1000;
            p
        }
        "cauchy" => {
            let mut p = base(
                "cauchy",
                "Cauchy outcomes, misspecified Gaussian Thompson sampling, delta = t^-0.2; no coverage target",
                location_settings("cauchy"),
                PolicyKind::GaussianThompson,
                location_designs(0.2),
            );
            p.horizon = 1000;
            p
        }
        "nonstat_a" => nonstationary("nonstat_a", "Step change at unit 501: ATE 0.6 -> 0.2 (running ATE decays toward 0.1); UCB1", 0.4),
        "nonstat_b" => nonstationary("nonstat_b", "Step change at unit 501 with a sign flip: ATE 0.6 -> -0.1; UCB1", 0.1),
        "race_high" => race("race_high", "Stopping race, MAD vs Bernoulli, high signal (0.2, 0.8); UCB1", 0.8),
        "race_low" => race("race_low", "Stopping race, MAD vs Bernoulli, low signal (0.2, 0.3); UCB1", 0.3),
        "howard_compare" => {
            let mut p = base(
                "howard_compare",
                "Asymptotic vs nonasymptotic CS, constant delta = 0.2 clipped MAD; Beta Thompson sampling",
                bernoulli_settings(),
                PolicyKind::BetaThompson,
                vec![
                    Design::bernoulli(),
                    Design::standard_bandit(),
                    Design::mad("clipped_mad", DeltaSchedule::Constant { c: 0.2 }),
                ],
            );
            p.nonasymptotic = Some(NonAsymptoticBoundary::Stitched { outcome_bound: 1.0 });
            p
        }
        "regret_decomp" => {
            let mut p = base(
                "regret_decomp",
                "Constant delta = 0.5 MAD against its Bernoulli and bandit components; 200 replicates",
                vec![Setting {
                    label: "p0=0.2,p1=0.8".into(),
                    outcome: OutcomeModelSpec::bernoulli(&[0.2, 0.8]),
                }],
                PolicyKind::BetaThompson,
                vec![
                    Design::bernoulli(),
                    Design::standard_bandit(),
                    Design::mad("mad_half", DeltaSchedule::Constant { c: 0.5 }),
                ],
            );
            p.replicates = 200;
            p
        }
        "batched" => {
            let mut p = base(
                "batched",
                "fig1 grid with assignment probabilities refreshed every 100 units; eta tuned for batch-level intrinsic time 2",
                bernoulli_settings(),
                PolicyKind::BetaThompson,
                fig1_designs(),
            );
            p.mode = Mode::Batched { batch_size: 100 };
            p.t_star = Some(2);
            p
        }
        _ => return None,
    })
}

/// All presets in catalog order.
pub fn all() -> Vec<ExperimentPreset> {
    NAMES.iter().map(|n| preset(n).expect("catalog name")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_is_valid() {
        for p in all() {
            p.validate().unwrap_or_else(|e| panic!("{}: {e}", p.name));
            assert!(!p.description.is_empty());
        }
        assert!(preset("nope").is_none());
    }

    #[test]
    fn fig1_shape() {
        let p = preset("fig1").unwrap();
        assert_eq!((p.horizon, p.replicates, p.alpha), (10_000, 100, 0.05));
        assert_eq!(p.settings.len(), 3);
        let labels: Vec<_> = p.designs.iter().map(|d| d.label.as_str()).collect();
        assert_eq!(labels, ["bernoulli", "standard_bandit", "unclipped_mad", "clipped_mad"]);
        assert!((p.cs_params().unwrap().eta - 0.02817118137696317).abs() < 1e-15);
    }

    #[test]
    fn presets_round_trip_json() {
        for p in all() {
            let text = serde_json::to_string(&p).unwrap();
            let back: ExperimentPreset = serde_json::from_str(&text).unwrap();
            assert_eq!(back, p);
        }
    }
}
