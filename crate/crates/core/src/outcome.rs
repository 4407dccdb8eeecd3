//! Potential-outcome models.
//!
//! Tables are materialized up front so that the same draws can be replayed
//! under several designs.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{check_arm, MadError, Result};
use crate::rng::{stream, Stream};

fn one() -> f64 {
    1.0
}

/// Per-arm outcome laws for one stationary segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ArmLaws {
    Bernoulli {
        p: Vec<f64>,
    },
    Normal {
        mean: Vec<f64>,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `mean + scale * t(df)`.
    StudentT {
        mean: Vec<f64>,
        #[serde(default = "one")]
        scale: f64,
        df: f64,
    },
    /// Student-t with one degree of freedom.
    Cauchy {
        mean: Vec<f64>,
        #[serde(default = "one")]
        scale: f64,
    },
}

impl ArmLaws {
    pub fn n_arms(&self) -> usize {
        match self {
            ArmLaws::Bernoulli { p } => p.len(),
            ArmLaws::Normal { mean, .. }
            | ArmLaws::StudentT { mean, .. }
            | ArmLaws::Cauchy { mean, .. } => mean.len(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ArmLaws::Bernoulli { .. } => "bernoulli",
            ArmLaws::Normal { .. } => "normal",
            ArmLaws::StudentT { .. } => "student_t",
            ArmLaws::Cauchy { .. } => "cauchy",
        }
    }

    /// Distributional mean of each arm, when it exists.
    pub fn arm_means(&self) -> Option<Vec<f64>> {
        match self {
            ArmLaws::Bernoulli { p } => Some(p.clone()),
            ArmLaws::Normal { mean, .. } => Some(mean.clone()),
            ArmLaws::StudentT { mean, df, .. } if *df > 1.0 => Some(mean.clone()),
            ArmLaws::StudentT { .. } | ArmLaws::Cauchy { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n_arms() < 2 {
            let field = match self {
                ArmLaws::Bernoulli { .. } => "p",
                _ => "mean",
            };
            return Err(MadError::invalid(field, "at least two arms are required"));
        }
        let finite_scale = |scale: f64| {
            if scale.is_finite() && scale > 0.0 {
                Ok(())
            } else {
                Err(MadError::invalid("scale", format!("must be positive, got {scale}")))
            }
        };
        let finite_means = |mean: &[f64]| {
            match mean.iter().position(|m| !m.is_finite()) {
                Some(i) => Err(MadError::invalid(format!("mean[{i}]"), "must be finite")),
                None => Ok(()),
            }
        };
        match self {
            ArmLaws::Bernoulli { p } => {
                if let Some(i) = p.iter().position(|v| !(0.0..=1.0).contains(v)) {
                    return Err(MadError::invalid(
                        format!("p[{i}]"),
                        format!("Bernoulli parameter must lie in [0, 1], got {}", p[i]),
                    ));
                }
                Ok(())
            }
            ArmLaws::Normal { mean, scale } | ArmLaws::Cauchy { mean, scale } => {
                finite_means(mean)?;
                finite_scale(*scale)
            }
            ArmLaws::StudentT { mean, scale, df } => {
                finite_means(mean)?;
                finite_scale(*scale)?;
                if !(df.is_finite() && *df >= 1.0) {
                    return Err(MadError::invalid("df", format!("degrees of freedom must be >= 1, got {df}")));
                }
                Ok(())
            }
        }
    }
}

/// A step change in the arm laws taking effect at unit `start` (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Changepoint {
    pub start: usize,
    #[serde(flatten)]
    pub laws: ArmLaws,
}

/// Outcome model: base laws plus optional step changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeModelSpec {
    #[serde(flatten)]
    pub laws: ArmLaws,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub changepoints: Vec<Changepoint>,
}

impl OutcomeModelSpec {
    pub fn stationary(laws: ArmLaws) -> Self {
        OutcomeModelSpec {
            laws,
            changepoints: Vec::new(),
        }
    }

    pub fn bernoulli(p: &[f64]) -> Self {
        Self::stationary(ArmLaws::Bernoulli { p: p.to_vec() })
    }

    pub fn with_changepoint(mut self, start: usize, laws: ArmLaws) -> Self {
        self.changepoints.push(Changepoint { start, laws });
        self
    }

    pub fn n_arms(&self) -> usize {
        self.laws.n_arms()
    }

    /// Heavy tails with no finite mean; coverage is not meaningful.
    pub fn is_misspecified(&self) -> bool {
        std::iter::once(&self.laws)
            .chain(self.changepoints.iter().map(|c| &c.laws))
            .any(|l| l.arm_means().is_none())
    }

    pub fn validate(&self, n_units: usize) -> Result<()> {
        if n_units == 0 {
            return Err(MadError::invalid("n_units", "must be positive"));
        }
        self.laws.validate()?;
        let k = self.n_arms();
        let mut previous = 0;
        for (j, cp) in self.changepoints.iter().enumerate() {
            let field = format!("changepoints[{j}]");
            if cp.laws.family() != self.laws.family() {
                return Err(MadError::invalid(
                    format!("{field}.family"),
                    format!("expected `{}`, got `{}`", self.laws.family(), cp.laws.family()),
                ));
            }
            if cp.laws.n_arms() != k {
                return Err(MadError::invalid(
                    field,
                    format!("expected {k} arms, got {}", cp.laws.n_arms()),
                ));
            }
            if cp.start <= previous || cp.start < 1 || cp.start > n_units {
                return Err(MadError::invalid(
                    format!("{field}.start"),
                    format!("starts must be strictly increasing within [1, {n_units}], got {}", cp.start),
                ));
            }
            cp.laws.validate().map_err(|e| e.within(&field))?;
            previous = cp.start;
        }
        Ok(())
    }

    /// Laws in force at 0-based unit index `i`.
    pub fn laws_at(&self, i: usize) -> &ArmLaws {
        self.changepoints
            .iter()
            .rev()
            .find(|cp| i + 1 >= cp.start)
            .map_or(&self.laws, |cp| &cp.laws)
    }
}

/// Dense `n_units x n_arms` matrix of potential outcomes `Y_i(w)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOutcomeTable {
    n_arms: usize,
    values: Vec<f64>,
    heavy_tailed: bool,
}

impl PotentialOutcomeTable {
    /// Build a table from explicit rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n_arms = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || n_arms < 2 {
            return Err(MadError::invalid("rows", "need at least one unit and two arms"));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != n_arms) {
            return Err(MadError::invalid(format!("rows[{i}]"), format!("expected {n_arms} columns")));
        }
        Ok(PotentialOutcomeTable {
            n_arms,
            values: rows.concat(),
            heavy_tailed: false,
        })
    }

    pub fn n_units(&self) -> usize {
        self.values.len() / self.n_arms
    }

    pub fn n_arms(&self) -> usize {
        self.n_arms
    }

    /// Whether the table was drawn from a law without a finite mean.
    pub fn heavy_tailed(&self) -> bool {
        self.heavy_tailed
    }

    pub fn get(&self, unit: usize, arm: usize) -> f64 {
        self.values[unit * self.n_arms + arm]
    }

    pub fn row(&self, unit: usize) -> &[f64] {
        &self.values[unit * self.n_arms..(unit + 1) * self.n_arms]
    }

    pub fn column_mean(&self, arm: usize) -> f64 {
        (0..self.n_units()).map(|i| self.get(i, arm)).sum::<f64>() / self.n_units() as f64
    }

    /// Running design-based ATE: element `t-1` is `(1/t) sum_{i<=t} (Y_i(w) - Y_i(w'))`.
    pub fn true_ate_curve(&self, w: usize, w_prime: usize) -> Result<Vec<f64>> {
        check_arm(w, self.n_arms)?;
        check_arm(w_prime, self.n_arms)?;
        if w == w_prime {
            return Err(MadError::invalid("w_prime", "the two arms of a contrast must differ"));
        }
        let mut sum = 0.0;
        Ok((0..self.n_units())
            .map(|i| {
                sum += self.get(i, w) - self.get(i, w_prime);
                sum / (i + 1) as f64
            })
            .collect())
    }
}

/// Draw a full potential-outcome table. Units are drawn in order, arms within
/// a unit in index order, all from the outcome stream of `seed`.
pub fn generate_table(spec: &OutcomeModelSpec, n_units: usize, seed: u64) -> Result<PotentialOutcomeTable> {
    spec.validate(n_units)?;
    let k = spec.n_arms();
    let mut rng = stream(seed, Stream::Outcomes);
    let mut values = Vec::with_capacity(n_units * k);
    // (first 0-based unit, laws, cached t distribution)
    let mut segments = Vec::with_capacity(spec.changepoints.len() + 1);
    for (start, laws) in std::iter::once((0, &spec.laws)).chain(spec.changepoints.iter().map(|c| (c.start - 1, &c.laws))) {
        let t_dist = match laws {
            ArmLaws::StudentT { df, .. } => Some(StudentT::new(*df).map_err(|e| MadError::invalid("df", e.to_string()))?),
            ArmLaws::Cauchy { .. } => Some(StudentT::new(1.0).expect("df = 1 is valid")),
            _ => None,
        };
        segments.push((start, laws, t_dist));
    }
    let mut seg = 0;
    for i in 0..n_units {
        while seg + 1 < segments.len() && i >= segments[seg + 1].0 {
            seg += 1;
        }
        let (_, laws, t_dist) = &segments[seg];
        match laws {
            ArmLaws::Bernoulli { p } => {
                values.extend(p.iter().map(|&p| if rng.gen::<f64>() < p { 1.0 } else { 0.0 }));
            }
            ArmLaws::Normal { mean, scale } => {
                for &m in mean {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    values.push(m + scale * z);
                }
            }
            ArmLaws::StudentT { mean, scale, .. } | ArmLaws::Cauchy { mean, scale } => {
                let dist = t_dist.as_ref().expect("t law cached");
                values.extend(mean.iter().map(|&m| m + scale * dist.sample(&mut rng)));
            }
        }
    }
    Ok(PotentialOutcomeTable {
        n_arms: k,
        values,
        heavy_tailed: spec.is_misspecified(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_bernoulli_table() {
        let t = generate_table(&OutcomeModelSpec::bernoulli(&[1.0, 0.0]), 3, 1).unwrap();
        assert_eq!(t, PotentialOutcomeTable::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap());
    }

    #[test]
    fn changepoint_switches_laws_at_start_unit() {
        let spec = OutcomeModelSpec::bernoulli(&[0.0, 1.0]).with_changepoint(501, ArmLaws::Bernoulli { p: vec![1.0, 0.0] });
        let t = generate_table(&spec, 1000, 3).unwrap();
        assert!((0..500).all(|i| t.row(i) == [0.0, 1.0]));
        assert!((500..1000).all(|i| t.row(i) == [1.0, 0.0]));
    }

    #[test]
    fn step_change_means() {
        let spec = OutcomeModelSpec::bernoulli(&[0.2, 0.8]).with_changepoint(501, ArmLaws::Bernoulli { p: vec![0.2, 0.1] });
        let t = generate_table(&spec, 100_500, 11).unwrap();
        let late: f64 = (500..t.n_units()).map(|i| t.get(i, 1)).sum::<f64>() / 100_000.0;
        let early: f64 = (0..500).map(|i| t.get(i, 1)).sum::<f64>() / 500.0;
        assert!((late - 0.1).abs() < 0.01, "{late}");
        assert!((early - 0.8).abs() < 0.08, "{early}");
    }

    #[test]
    fn normal_null_difference_concentrates() {
        let spec = OutcomeModelSpec::stationary(ArmLaws::Normal { mean: vec![1.0, 1.0], scale: 1.0 });
        let t = generate_table(&spec, 100_000, 5).unwrap();
        let curve = t.true_ate_curve(1, 0).unwrap();
        assert!(curve.last().unwrap().abs() <= 0.02);
    }

    #[test]
    fn true_ate_curve_examples() {
        let t = PotentialOutcomeTable::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(t.true_ate_curve(1, 0).unwrap(), vec![-1.0, -1.0]);
        let t = PotentialOutcomeTable::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(t.true_ate_curve(1, 0).unwrap(), vec![1.0, 0.5]);
        assert!(matches!(t.true_ate_curve(1, 1), Err(MadError::InvalidParameter { .. })));
        assert!(matches!(t.true_ate_curve(2, 0), Err(MadError::ArmOutOfRange { .. })));
    }

    #[test]
    fn validation_names_offending_field() {
        let err = generate_table(&OutcomeModelSpec::bernoulli(&[0.2, 1.3]), 10, 0).unwrap_err();
        assert!(err.to_string().contains("p[1]"), "{err}");
        let bad_t = OutcomeModelSpec::stationary(ArmLaws::StudentT { mean: vec![0.0, 0.0], scale: 1.0, df: 0.5 });
        assert!(generate_table(&bad_t, 10, 0).unwrap_err().to_string().contains("df"));
        let bad_cp = OutcomeModelSpec::bernoulli(&[0.2, 0.3])
            .with_changepoint(5, ArmLaws::Bernoulli { p: vec![0.1, 0.1] })
            .with_changepoint(5, ArmLaws::Bernoulli { p: vec![0.1, 0.1] });
        assert!(generate_table(&bad_cp, 10, 0).unwrap_err().to_string().contains("changepoints[1].start"));
        let out_of_range = OutcomeModelSpec::bernoulli(&[0.2, 0.3]).with_changepoint(11, ArmLaws::Bernoulli { p: vec![0.1, 0.1] });
        assert!(generate_table(&out_of_range, 10, 0).is_err());
    }

    #[test]
    fn cauchy_is_flagged_not_rejected() {
        let spec = OutcomeModelSpec::stationary(ArmLaws::Cauchy { mean: vec![1.0, 2.0], scale: 1.0 });
        let t = generate_table(&spec, 1000, 9).unwrap();
        assert!(t.heavy_tailed());
        assert!((0..1000).all(|i| t.row(i).iter().all(|v| v.is_finite())));
    }

    #[test]
    fn config_shape_round_trips() {
        let json = r#"{"family":"bernoulli","p":[0.2,0.8],"changepoints":[{"start":501,"family":"bernoulli","p":[0.2,0.1]}]}"#;
        let spec: OutcomeModelSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.changepoints[0].start, 501);
        let back: OutcomeModelSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }
}
