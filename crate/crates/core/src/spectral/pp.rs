use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::charmat::char_inverse;
use crate::error::{FsdeError, Result};
use crate::linalg::op_norm_c;
use crate::model::SignedMatrixMeasure;
use crate::optimize;

pub const PP_GRID: usize = 4096;

/// Explicit constant in ‖Γ(t)‖ ≤ bound·e^{λt}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpBoundResult {
    pub lambda: f64,
    pub lambda0: f64,
    pub nu_norm: f64,
    pub lambda_minus: f64,
    pub t_lambda: f64,
    pub rho_lambda: f64,
    pub theta_argmax: f64,
    /// Largest ρ seen on the raw grid, before refinement.
    pub rho_grid: f64,
    pub bound: f64,
}

/// ‖Q_z⁻¹ − (z − λ₀)⁻¹I‖ at z = λ + iθ.
fn g_norm(nu: &SignedMatrixMeasure, lambda0: f64, lambda: f64, theta: f64) -> Result<f64> {
    let z = Complex64::new(lambda, theta);
    let mut g = char_inverse(nu, z).ok_or_else(|| {
        FsdeError::RootSearch(format!("Q singular at {z}; the abscissa is not certified"))
    })?;
    let pole = (z - Complex64::new(lambda0, 0.0)).inv();
    for r in 0..g.nrows() {
        g[(r, r)] -= pole;
    }
    Ok(op_norm_c(&g))
}

/// (λ−λ₀+1)π/(λ−λ₀) + 4(|λ₀| + e^{λ⁻r₀}‖ν‖)/T_λ + 2ρ_λT_λ with
/// T_λ = 2e^{λ⁻r₀}‖ν‖ and ρ_λ the max of ‖G‖ over θ ∈ [−T_λ, T_λ].
pub fn pp_bound(nu: &SignedMatrixMeasure, lambda0: f64, lambda: f64, n_grid: usize) -> Result<PpBoundResult> {
    if !(lambda > lambda0) {
        return Err(FsdeError::BelowAbscissa { lambda, lambda0 });
    }
    let n_grid = n_grid.max(2);
    let nu_norm = nu.norm();
    let lambda_minus = (-lambda).max(0.0);
    let growth = (lambda_minus * nu.r0()).exp() * nu_norm;
    let t_lambda = 2.0 * growth;
    let gap = lambda - lambda0;

    // ‖G‖ is even in θ, so only [0, T_λ] is scanned
    let norms: Vec<Result<f64>> = (0..=n_grid)
        .into_par_iter()
        .map(|i| g_norm(nu, lambda0, lambda, t_lambda * i as f64 / n_grid as f64))
        .collect();
    let mut rho_grid = 0.0;
    let mut arg = 0;
    for (i, v) in norms.into_iter().enumerate() {
        let v = v?;
        if v > rho_grid {
            rho_grid = v;
            arg = i;
        }
    }
    let step = t_lambda / n_grid as f64;
    let (mut theta_argmax, mut rho) = (arg as f64 * step, rho_grid);
    if rho_grid > 0.0 {
        let lo = (arg as f64 - 1.0).max(0.0) * step;
        let hi = ((arg + 1) as f64 * step).min(t_lambda);
        let (th, v) = optimize::golden_max(
            |th| g_norm(nu, lambda0, lambda, th).unwrap_or(f64::INFINITY),
            lo,
            hi,
            1e-10 * t_lambda.max(1.0),
        );
        if v > rho {
            rho = v;
            theta_argmax = th;
        }
    }
    if !rho.is_finite() {
        return Err(FsdeError::RootSearch("Q singular near the refined maximiser".into()));
    }
    let bound = if t_lambda > 0.0 {
        (gap + 1.0) * PI / gap + 4.0 * (lambda0.abs() + growth) / t_lambda + 2.0 * rho * t_lambda
    } else {
        f64::INFINITY
    };
    Ok(PpBoundResult {
        lambda,
        lambda0,
        nu_norm,
        lambda_minus,
        t_lambda,
        rho_lambda: rho,
        theta_argmax,
        rho_grid,
        bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_closed_form() {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(0.0, -1.0)]).unwrap();
        let r = pp_bound(&nu, -1.0, -0.5, PP_GRID).unwrap();
        assert_eq!(r.rho_lambda, 0.0);
        let e = 0.5f64.exp();
        let want = 3.0 * PI + 4.0 * (1.0 + e) / (2.0 * e);
        assert!((r.bound - want).abs() < 1e-12, "{}", r.bound);
        assert!((r.bound - 12.638).abs() < 1e-3);
        assert!((r.t_lambda - 2.0 * e).abs() < 1e-15);
    }

    #[test]
    fn rejects_left_of_abscissa() {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(0.0, -1.0)]).unwrap();
        assert!(matches!(
            pp_bound(&nu, -1.0, -1.5, 64),
            Err(FsdeError::BelowAbscissa { .. })
        ));
    }

    #[test]
    fn zero_measure_gives_infinite_bound() {
        let nu = SignedMatrixMeasure::zero(1.0, 1).unwrap();
        let r = pp_bound(&nu, 0.0, 0.5, 64).unwrap();
        assert!(r.bound.is_infinite());
    }

    #[test]
    fn delay_refinement_not_below_grid() {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(-1.0, -(-1.0f64).exp())]).unwrap();
        let r = pp_bound(&nu, -1.0, -0.5, 512).unwrap();
        assert!(r.rho_lambda >= r.rho_grid && r.rho_grid > 0.0);
    }
}
