//! Explicit exponential-rate certificates and the Harnack exponent.

mod harnack;

pub use harnack::{
    best_harnack_exponent, endpoint_factor, harnack_exponent, memory_factor, weight_moment_exponent,
    HarnackInputs, HarnackParams,
};

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::SignedMatrixMeasure;
use crate::optimize;
use crate::spectral::{pp_bound, GammaTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Theorem {
    /// λ = sup_{s∈[0,λ₁]}(s − λ₂e^{r₀s}) from the one-sided condition.
    Dissipative,
    /// Closed form from (k₁, k₂) via the split 2k₂ab ≤ s a² + k₂²b²/s.
    LipschitzSplit,
    /// λ = sup_{k∈(0,−λ₀)}(k − c_k k₂ e^{kr₀}) for the semi-linear equation.
    SemiLinear,
    /// Semi-linear special cases: b = 0, or ν = Aδ₀ with A symmetric.
    SemiLinearSpecial,
}

impl Theorem {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Dissipative => "dissipative",
            Self::LipschitzSplit => "lipschitz-split",
            Self::SemiLinear => "semi-linear",
            Self::SemiLinearSpecial => "semi-linear-special",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CkSource {
    Empirical,
    PpBound,
    /// c_k = 1 for ν = Aδ₀, A symmetric.
    Unit,
}

impl CkSource {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Empirical => "empirical",
            Self::PpBound => "pp-bound",
            Self::Unit => "unit",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RateInputs {
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub r0: f64,
    pub lambda0: Option<f64>,
    /// (k, c_k) pairs used; the optimiser's value is last.
    pub ck: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateCert {
    pub theorem: Theorem,
    pub applicable: bool,
    pub lambda: f64,
    /// Maximising s (or k).
    pub optimizer: f64,
    /// Domain of the optimiser.
    pub domain: (f64, f64),
    pub inputs: RateInputs,
    pub ck_source: Option<CkSource>,
    /// Independent grid-scan value of the same supremum.
    pub grid_lambda: Option<f64>,
    pub note: Option<String>,
}

/// λ = sup_{s∈[0,λ₁]}(s − λ₂e^{r₀s}).
pub fn rate_thm11(lambda1: f64, lambda2: f64, r0: f64) -> RateCert {
    let obj = |s: f64| s - lambda2 * (r0 * s).exp();
    let s_star = if lambda2 > 0.0 {
        ((1.0 / (lambda2 * r0)).ln() / r0).clamp(0.0, lambda1.max(0.0))
    } else {
        lambda1.max(0.0)
    };
    let lambda = obj(s_star);
    let (_, _, grid) = optimize::grid_max(obj, 0.0, lambda1.max(0.0), 10_000);
    RateCert {
        theorem: Theorem::Dissipative,
        applicable: lambda > 0.0,
        lambda,
        optimizer: s_star,
        domain: (0.0, lambda1.max(0.0)),
        inputs: RateInputs {
            lambda1: Some(lambda1),
            lambda2: Some(lambda2),
            r0,
            ..Default::default()
        },
        ck_source: None,
        grid_lambda: Some(grid),
        note: None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzSplitResult {
    pub applicable: bool,
    /// Largest admissible k₂².
    pub rhs: f64,
    /// rhs − k₂².
    pub margin: f64,
    pub s0: f64,
    pub lambda: f64,
    /// Grid-scan argmax of (2k₁s − s²)e^{−r₀(2k₁−s)} on (0, 2k₁).
    pub s_grid: f64,
}

/// Lipschitz-split check from (k₁, k₂): admissibility margin, split point s₀ and rate.
pub fn check_cor12(k1: f64, k2: f64, r0: f64) -> LipschitzSplitResult {
    if !(k1 > 0.0) {
        return LipschitzSplitResult {
            applicable: false,
            rhs: 0.0,
            margin: -k2 * k2,
            s0: 0.0,
            lambda: f64::NEG_INFINITY,
            s_grid: 0.0,
        };
    }
    let kr = k1 * r0;
    let q = (kr * kr + 1.0).sqrt();
    // q − 1 without cancellation
    let qm1 = kr * kr / (q + 1.0);
    let rhs = 2.0 * qm1 / (r0 * r0) * (qm1 - kr).exp();
    let s0 = (kr + qm1) / r0;
    let margin = rhs - k2 * k2;
    let lambda = (2.0 * qm1 / (r0 * r0) - k2 * k2 * (1.0 + kr - q).exp()) / s0;
    let obj = |s: f64| (2.0 * k1 * s - s * s) * (-r0 * (2.0 * k1 - s)).exp();
    let (s_grid, _) = optimize::grid_then_golden(obj, 0.0, 2.0 * k1, 2001);
    LipschitzSplitResult {
        applicable: margin > 0.0,
        rhs,
        margin,
        s0,
        lambda,
        s_grid,
    }
}

/// Wraps `check_cor12` as a rate certificate.
pub fn rate_lipschitz_split(k1: f64, k2: f64, r0: f64) -> RateCert {
    let c = check_cor12(k1, k2, r0);
    RateCert {
        theorem: Theorem::LipschitzSplit,
        applicable: c.applicable && c.lambda > 0.0,
        lambda: c.lambda,
        optimizer: c.s0,
        domain: (0.0, 2.0 * k1.max(0.0)),
        inputs: RateInputs {
            k1: Some(k1),
            k2: Some(k2),
            lambda1: Some(2.0 * k1 - c.s0),
            lambda2: Some(if c.s0 > 0.0 { k2 * k2 / c.s0 } else { f64::INFINITY }),
            r0,
            ..Default::default()
        },
        ck_source: None,
        grid_lambda: None,
        note: Some(format!("margin = {:.6e}", c.margin)),
    }
}

/// Source of c_k in ‖Γ(t)‖ ≤ c_k e^{−kt}.
pub trait CkProvider {
    fn ck(&self, k: f64) -> Result<f64>;
    fn source(&self) -> CkSource;
    /// Whether k = −λ₀ itself is admissible.
    fn closed_at_abscissa(&self) -> bool {
        false
    }
}

/// c_k = sup_t ‖Γ(t)‖e^{kt} over a tabulated fundamental solution.
pub struct EmpiricalCk<'a>(pub &'a GammaTable);

impl CkProvider for EmpiricalCk<'_> {
    fn ck(&self, k: f64) -> Result<f64> {
        Ok(self.0.ck_empirical(k).ck)
    }

    fn source(&self) -> CkSource {
        CkSource::Empirical
    }
}

/// c_k = the explicit bound at λ = −k.
pub struct PpCk<'a> {
    pub nu: &'a SignedMatrixMeasure,
    pub lambda0: f64,
    pub n_grid: usize,
}

impl CkProvider for PpCk<'_> {
    fn ck(&self, k: f64) -> Result<f64> {
        Ok(pp_bound(self.nu, self.lambda0, -k, self.n_grid)?.bound)
    }

    fn source(&self) -> CkSource {
        CkSource::PpBound
    }
}

pub struct UnitCk;

impl CkProvider for UnitCk {
    fn ck(&self, _k: f64) -> Result<f64> {
        Ok(1.0)
    }

    fn source(&self) -> CkSource {
        CkSource::Unit
    }

    fn closed_at_abscissa(&self) -> bool {
        true
    }
}

/// Number of log-uniform points in the k search.
pub const SEMI_LINEAR_GRID: usize = 512;
/// Relative gap kept below −λ₀ on the open interval.
pub const SEMI_LINEAR_EDGE: f64 = 1e-3;

/// λ = sup_k (k − c_k k₂ e^{kr₀}) over k ∈ (0, −λ₀).
pub fn rate_thm13(
    lambda0: f64,
    k2: f64,
    r0: f64,
    provider: &dyn CkProvider,
    n_grid: usize,
) -> Result<RateCert> {
    let inputs = RateInputs {
        k2: Some(k2),
        r0,
        lambda0: Some(lambda0),
        ..Default::default()
    };
    if !(lambda0 < 0.0) {
        return Ok(RateCert {
            theorem: Theorem::SemiLinear,
            applicable: false,
            lambda: f64::NEG_INFINITY,
            optimizer: 0.0,
            domain: (0.0, 0.0),
            inputs,
            ck_source: Some(provider.source()),
            grid_lambda: None,
            note: Some("spectral abscissa is not negative".into()),
        });
    }
    let kmax = -lambda0;
    let hi = if provider.closed_at_abscissa() {
        kmax
    } else {
        kmax * (1.0 - SEMI_LINEAR_EDGE)
    };
    let lo = kmax * 1e-4;
    let n = n_grid.max(3);
    let ks: Vec<f64> = (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect();
    let objective = |k: f64| -> Result<(f64, f64)> {
        if k2 == 0.0 {
            return Ok((k, f64::NAN));
        }
        let ck = provider.ck(k)?;
        Ok((k - ck * k2 * (k * r0).exp(), ck))
    };
    let mut best = (0usize, f64::NEG_INFINITY);
    let mut table = Vec::with_capacity(n);
    for (i, &k) in ks.iter().enumerate() {
        let (v, ck) = objective(k)?;
        table.push((k, ck));
        if v > best.1 {
            best = (i, v);
        }
    }
    let (i, grid_val) = best;
    let a = ks[i.saturating_sub(1)];
    let b = ks[(i + 1).min(n - 1)];
    let mut err = None;
    let (k_ref, v_ref) = optimize::golden_max(
        |k| match objective(k) {
            Ok((v, _)) => v,
            Err(e) => {
                err = Some(e);
                f64::NEG_INFINITY
            }
        },
        a,
        b,
        1e-10,
    );
    if let Some(e) = err {
        return Err(e);
    }
    let (k_star, lambda) = if v_ref >= grid_val {
        (k_ref, v_ref)
    } else {
        (ks[i], grid_val)
    };
    let ck_star = if k2 == 0.0 { provider.ck(k_star).ok() } else { objective(k_star)?.1.into() };
    let mut inputs = inputs;
    inputs.ck = table
        .into_iter()
        .filter(|(_, c)| c.is_finite())
        .step_by((n / 16).max(1))
        .collect();
    if let Some(c) = ck_star {
        inputs.ck.push((k_star, c));
    }
    Ok(RateCert {
        theorem: Theorem::SemiLinear,
        applicable: lambda > 0.0,
        lambda,
        optimizer: k_star,
        domain: (0.0, kmax),
        inputs,
        ck_source: Some(provider.source()),
        grid_lambda: Some(grid_val),
        note: None,
    })
}

/// Special cases: b = 0 (any λ below −λ₀) and ν = Aδ₀ with A symmetric
/// (c_k = 1 on the closed interval). Returns None when neither applies.
pub fn rate_semi_linear_special(
    nu: &SignedMatrixMeasure,
    lambda0: f64,
    k2: f64,
    n_grid: usize,
) -> Result<Option<RateCert>> {
    let symmetric_origin = nu
        .origin_only()
        .filter(|a| (a - a.transpose()).amax() <= 1e-14 * a.amax().max(1.0));
    let mut cert = if k2 == 0.0 {
        rate_thm13(lambda0, 0.0, nu.r0(), &UnitCk, n_grid)?
    } else if symmetric_origin.is_some() {
        rate_thm13(lambda0, k2, nu.r0(), &UnitCk, n_grid)?
    } else {
        return Ok(None);
    };
    cert.theorem = Theorem::SemiLinearSpecial;
    if k2 == 0.0 {
        cert.ck_source = None;
        cert.note = Some("b = 0: every rate below -lambda0 is admissible".into());
        if symmetric_origin.is_none() {
            // the closed endpoint needs c_k = 1, which only the symmetric case gives
            let kmax = -lambda0;
            let hi = kmax * (1.0 - SEMI_LINEAR_EDGE);
            if cert.optimizer > hi {
                cert.optimizer = hi;
                cert.lambda = hi;
            }
        }
        cert.inputs.ck.clear();
    }
    Ok(Some(cert))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dissipative_rate_examples() {
        let c = rate_thm11(1.0, 0.0, 1.0);
        assert_eq!((c.lambda, c.optimizer), (1.0, 1.0));
        let c = rate_thm11(2.0, 0.1, 1.0);
        assert_eq!(c.optimizer, 2.0);
        assert!((c.lambda - (2.0 - 0.1 * 2f64.exp())).abs() < 1e-15);
        assert!((c.lambda - 1.26110).abs() < 1e-5);
        let c = rate_thm11(1.0, 1.0, 1.0);
        assert_eq!(c.optimizer, 0.0);
        assert_eq!(c.lambda, -1.0);
        assert!(!c.applicable);
    }

    #[test]
    fn dissipative_rate_interior_optimum() {
        // stationary point ln(1/(λ₂r₀))/r₀ = ln 10 < λ₁
        let c = rate_thm11(5.0, 0.1, 1.0);
        assert!((c.optimizer - 10f64.ln()).abs() < 1e-14);
        assert!(c.lambda >= c.grid_lambda.unwrap());
    }

    #[test]
    fn lipschitz_split_reference_values() {
        let c = check_cor12(1.0, 0.0, 1.0);
        let want = 2.0 * (2f64.sqrt() - 1.0) * (2f64.sqrt() - 2.0).exp();
        assert!((c.rhs - want).abs() < 1e-15);
        // 2(√2−1)e^{√2−2} = 0.4611588
        assert!((c.rhs - 0.461_158_8).abs() < 1e-7);
        assert!((c.s0 - 2f64.sqrt()).abs() < 1e-15);
        assert!(c.applicable);
        let c = check_cor12(1.0, 0.7, 1.0);
        assert!(!c.applicable);
        assert!(c.margin < 0.0);
    }

    #[test]
    fn split_rate_matches_identity() {
        for &(k1, k2, r0) in &[(1.0, 0.3, 1.0), (2.0, 1.0, 0.5), (0.3, 0.05, 3.0)] {
            let c = check_cor12(k1, k2, r0);
            assert!(c.applicable);
            let l1 = 2.0 * k1 - c.s0;
            let l2 = k2 * k2 / c.s0;
            let direct = l1 - l2 * (r0 * l1).exp();
            assert!((c.lambda - direct).abs() < 1e-12 * direct.abs().max(1.0));
            let chain = rate_thm11(l1, l2, r0);
            assert!((chain.lambda - c.lambda).abs() < 1e-12 * c.lambda.abs().max(1.0));
        }
    }

    #[test]
    fn semi_linear_unit_symmetric_case() {
        let c = rate_thm13(-1.0, 0.2, 1.0, &UnitCk, SEMI_LINEAR_GRID).unwrap();
        assert!((c.optimizer - 1.0).abs() < 1e-12);
        assert!((c.lambda - (1.0 - 0.2 * 1f64.exp())).abs() < 1e-12);
    }

    #[test]
    fn semi_linear_without_memory_reaches_abscissa() {
        let c = rate_thm13(-1.0, 0.0, 1.0, &UnitCk, SEMI_LINEAR_GRID).unwrap();
        assert!((c.lambda - 1.0).abs() < 1e-12);
        let c = rate_thm13(0.2, 0.0, 1.0, &UnitCk, SEMI_LINEAR_GRID).unwrap();
        assert!(!c.applicable);
    }
}
