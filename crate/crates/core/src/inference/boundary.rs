//! Time-uniform boundaries `u(v)` for the nonasymptotic confidence sequence
//! `center ± u(V_t) / t`, where `V_t` is the intrinsic time.

use serde::{Deserialize, Serialize};

use crate::error::{MadError, Result};

/// A two-sided boundary at level `alpha`. Every variant is nondecreasing in
/// the intrinsic time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Boundary {
    /// Sub-Gaussian normal mixture with mixing scale `rho`:
    /// `u(v) = sqrt((v + rho) ln((v + rho) / (rho alpha^2)))`.
    NormalMixture { rho: f64 },
    /// Polynomially stitched sub-exponential boundary with scale `c`,
    /// stitching ratio `eta`, exponent `s` and starting intrinsic time `m`.
    /// Each side is run at `alpha / 2`.
    Stitched { c: f64, eta: f64, s: f64, m: f64 },
}

impl Boundary {
    /// Stitched boundary with the customary `eta = 2`, `s = 1.4`, `m = 1`.
    pub fn stitched(c: f64) -> Self {
        Boundary::Stitched { c, eta: 2.0, s: 1.4, m: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Boundary::NormalMixture { rho } if !(rho.is_finite() && rho > 0.0) => {
                Err(MadError::invalid("rho", format!("must be positive, got {rho}")))
            }
            Boundary::Stitched { c, .. } if !(c.is_finite() && c >= 0.0) => {
                Err(MadError::invalid("c", format!("must be non-negative, got {c}")))
            }
            Boundary::Stitched { eta, .. } if !(eta > 1.0) => Err(MadError::invalid("eta", "must exceed 1")),
            Boundary::Stitched { s, .. } if !(s > 1.0) => Err(MadError::invalid("s", "must exceed 1")),
            Boundary::Stitched { m, .. } if !(m > 0.0) => Err(MadError::invalid("m", "must be positive")),
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, v: f64, alpha: f64) -> f64 {
        let v = v.max(0.0);
        match *self {
            Boundary::NormalMixture { rho } => ((v + rho) * ((v + rho) / (rho * alpha * alpha)).ln()).sqrt(),
            Boundary::Stitched { c, eta, s, m } => {
                let v = v.max(m);
                let level = alpha / 2.0;
                let ell = s * (eta * v / m).ln().ln() + (zeta(s) / (level * eta.ln().powf(s))).ln();
                let k1 = (eta.powf(0.25) + eta.powf(-0.25)) / std::f64::consts::SQRT_2;
                let k2 = (eta.sqrt() + 1.0) / 2.0;
                k1 * (v * ell).sqrt() + c * k2 * ell
            }
        }
    }
}

/// Mixing scale that minimizes `u(v_star) / v_star` for the normal mixture.
///
/// Stationarity in `rho` reduces to `ln(1 + x) - 2 ln(alpha) = x` with
/// `x = v_star / rho`, solved by bisection.
pub fn optimal_rho(v_star: f64, alpha: f64) -> Result<f64> {
    if !(v_star > 0.0) {
        return Err(MadError::invalid("v_star", "must be positive"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MadError::invalid("alpha", "must lie in (0, 1)"));
    }
    let h = |x: f64| (1.0 + x).ln() - 2.0 * alpha.ln() - x;
    let (mut lo, mut hi) = (0.0, 1.0);
    while h(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(v_star / (0.5 * (lo + hi)))
}

/// Riemann zeta for `s > 1` by Euler-Maclaurin with 32 explicit terms.
fn zeta(s: f64) -> f64 {
    const N: f64 = 32.0;
    let head: f64 = (1..32).map(|n| (n as f64).powf(-s)).sum();
    let n_s = N.powf(-s);
    head + N.powf(1.0 - s) / (s - 1.0) + 0.5 * n_s + s * n_s / (12.0 * N)
        - s * (s + 1.0) * (s + 2.0) * n_s / (720.0 * N.powi(3))
}
