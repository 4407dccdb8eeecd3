//! Mixture adaptive design (MAD) for multi-armed bandit experiments.
//!
//! The MAD mixes any bandit policy with a uniform (Bernoulli) design through a
//! deterministic weight `delta_t`, which keeps every assignment probability at
//! least `delta_t / K`. That floor is what makes the inverse-propensity
//! weighted ATE estimator and its asymptotic confidence sequence valid at
//! every time, while the bandit still steers most traffic.
//!
//! * [`outcome`] draws potential-outcome tables.
//! * [`policy`] holds the underlying bandit algorithms.
//! * [`design`] implements the mixture, schedules and trajectories.
//! * [`inference`] computes IPW estimates, confidence sequences and stopping
//!   times.
//! * [`harness`] replicates experiments and aggregates metric curves.

pub mod cli;
pub mod config;
pub mod design;
pub mod error;
pub mod harness;
pub mod inference;
pub mod outcome;
pub mod policy;
pub mod rng;

pub use design::{mix, run_trajectory, DeltaSchedule, Design, DesignKind, Mode, Session, Trajectory, TrajectoryConfig};
pub use error::{MadError, Result};
pub use inference::{asymptotic_radius, cs_track, eta_for_horizon, ipw_step, CsParams};
pub use outcome::{generate_table, OutcomeModelSpec, PotentialOutcomeTable};
pub use policy::{AssignmentDistribution, PolicyKind, PolicyState};
