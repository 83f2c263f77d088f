use serde::{Deserialize, Serialize};

use crate::error::{FsdeError, Result};
use crate::model::Segment;
use crate::optimize;

/// Free parameters of the Harnack inequality: exponent p > 1, split δ > 0,
/// pre-horizon t > 0 (the inequality holds at time t + r0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnackParams {
    pub p: f64,
    pub delta: f64,
    pub t: f64,
}

impl HarnackParams {
    pub fn new(p: f64, delta: f64, t: f64) -> Result<Self> {
        if !(p > 1.0) {
            return Err(FsdeError::InvalidParameter {
                name: "p",
                value: p,
                constraint: "must exceed 1",
            });
        }
        if !(delta > 0.0) {
            return Err(FsdeError::InvalidParameter {
                name: "delta",
                value: delta,
                constraint: "must be positive",
            });
        }
        if !(t > 0.0) {
            return Err(FsdeError::InvalidParameter {
                name: "t",
                value: t,
                constraint: "must be positive",
            });
        }
        Ok(Self { p, delta, t })
    }
}

/// Model constants and initial displacement entering the exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarnackInputs {
    pub k1: f64,
    pub k2: f64,
    pub sigma_inv_norm: f64,
    /// |ξ(0) − η(0)|.
    pub delta0: f64,
    /// ‖ξ − η‖∞.
    pub sup_dist: f64,
    pub r0: f64,
}

impl HarnackInputs {
    pub fn from_segments(
        k1: f64,
        k2: f64,
        sigma_inv_norm: f64,
        xi: &Segment,
        eta: &Segment,
    ) -> Self {
        let delta0 = xi
            .endpoint()
            .iter()
            .zip(eta.endpoint())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        Self {
            k1,
            k2,
            sigma_inv_norm,
            delta0,
            sup_dist: xi.sup_dist(eta),
            r0: xi.grid().r0,
        }
    }
}

/// 2k₁/(e^{2k₁t} − 1), with limit 1/t at k₁ = 0.
pub fn endpoint_factor(k1: f64, t: f64) -> f64 {
    let x = 2.0 * k1 * t;
    if x == 0.0 {
        return 1.0 / t;
    }
    x / x.exp_m1() / t
}

/// (e^{4k₁t} − 1 − 4k₁te^{2k₁t}) / (2k₁(e^{2k₁t} − 1)²), with limit t/3.
///
/// With x = 2k₁t this is t·(sinh x − x)/(2x sinh²(x/2)), an even function
/// of x equal to t(1 − x²/30)/3 + O(x⁴) near 0 and ≈ t/|x| for large |x|.
pub fn memory_factor(k1: f64, t: f64) -> f64 {
    let x = (2.0 * k1 * t).abs();
    let f = if x < 1e-4 {
        (1.0 - x * x / 30.0) / 3.0
    } else if x > 700.0 {
        1.0 / x
    } else {
        let sh = (0.5 * x).sinh();
        (x.sinh() - x) / (2.0 * x * sh * sh)
    };
    t * f
}

fn bracket(hp: &HarnackParams, inp: &HarnackInputs) -> f64 {
    let d2 = inp.delta0 * inp.delta0;
    d2 * endpoint_factor(inp.k1, hp.t)
        + inp.k2 * inp.k2 / hp.delta
            * (inp.r0 * inp.sup_dist * inp.sup_dist + d2 * memory_factor(inp.k1, hp.t))
}

/// Exponent Φ in (P_{t+r0} f(ξ))^p ≤ P_{t+r0} f^p(η) · e^Φ:
/// p²‖σ⁻¹‖²(1+δ)/(2(p−1)) · {Δ₀²·2k₁/(e^{2k₁t}−1) + (k₂²/δ)(r₀‖ξ−η‖∞² + Δ₀²·memory)}.
pub fn harnack_exponent(hp: &HarnackParams, inp: &HarnackInputs) -> f64 {
    let p = hp.p;
    let pref = p * p * inp.sigma_inv_norm * inp.sigma_inv_norm * (1.0 + hp.delta) / (2.0 * (p - 1.0));
    let b = bracket(hp, inp);
    if b == 0.0 {
        0.0
    } else {
        pref * b
    }
}

/// Log of the bound on E R^{p/(p−1)} for the coupling weight; the Harnack
/// exponent is (p − 1) times this.
pub fn weight_moment_exponent(hp: &HarnackParams, inp: &HarnackInputs) -> f64 {
    harnack_exponent(hp, inp) / (hp.p - 1.0)
}

/// Minimises the exponent over δ by golden-section search on log δ ∈ [−20, 20].
pub fn best_harnack_exponent(p: f64, t: f64, inp: &HarnackInputs) -> Result<(f64, f64)> {
    HarnackParams::new(p, 1.0, t)?;
    let phi = |u: f64| harnack_exponent(&HarnackParams { p, delta: u.exp(), t }, inp);
    let (u, neg) = optimize::golden_max(|u| -phi(u), -20.0, 20.0, 1e-12);
    Ok((u.exp(), -neg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(k1: f64, k2: f64) -> HarnackInputs {
        HarnackInputs {
            k1,
            k2,
            sigma_inv_norm: 1.0,
            delta0: 0.8,
            sup_dist: 1.3,
            r0: 1.0,
        }
    }

    #[test]
    fn zero_displacement_gives_zero() {
        let mut inp = inputs(1.0, 0.5);
        inp.delta0 = 0.0;
        inp.sup_dist = 0.0;
        let hp = HarnackParams::new(2.0, 1.0, 1.0).unwrap();
        assert_eq!(harnack_exponent(&hp, &inp), 0.0);
    }

    #[test]
    fn limits_at_zero_rate() {
        assert_eq!(endpoint_factor(0.0, 2.0), 0.5);
        assert!((memory_factor(0.0, 2.0) - 2.0 / 3.0).abs() < 1e-15);
        for k1 in [1e-6, -1e-6] {
            assert!((endpoint_factor(k1, 2.0) - 0.5).abs() < 1e-5);
            assert!((memory_factor(k1, 2.0) - 2.0 / 3.0).abs() < 1e-5);
        }
    }

    #[test]
    fn memory_factor_matches_direct_formula() {
        for &(k1, t) in &[(0.7, 1.0), (-0.4, 2.0), (3.0, 0.5), (0.05, 1.0)] {
            let x: f64 = 2.0 * k1 * t;
            let direct = ((2.0 * x).exp() - 1.0 - 2.0 * x * x.exp())
                / (2.0 * k1 * x.exp_m1().powi(2));
            assert!((memory_factor(k1, t) - direct).abs() < 1e-10 * direct.abs());
        }
    }

    #[test]
    fn best_delta_is_analytic_minimiser() {
        let inp = inputs(0.5, 0.4);
        let t = 1.0;
        let (delta, phi) = best_harnack_exponent(2.0, t, &inp).unwrap();
        // Φ(δ) = c(1+δ)(A + K/δ) is minimised at δ = √(K/A)
        let a = inp.delta0.powi(2) * endpoint_factor(inp.k1, t);
        let k = inp.k2.powi(2) * (inp.r0 * inp.sup_dist.powi(2) + inp.delta0.powi(2) * memory_factor(inp.k1, t));
        let c = 4.0 / 2.0;
        assert!((delta - (k / a).sqrt()).abs() < 1e-5 * delta);
        assert!((phi - c * (a.sqrt() + k.sqrt()).powi(2)).abs() < 1e-10 * phi);
    }
}
