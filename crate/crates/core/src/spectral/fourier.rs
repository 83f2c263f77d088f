use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::charmat::char_inverse;
use crate::error::{FsdeError, Result};
use crate::model::SignedMatrixMeasure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierConfig {
    pub theta_max: f64,
    pub n_grid: usize,
}

impl Default for FourierConfig {
    fn default() -> Self {
        Self {
            theta_max: 4000.0,
            n_grid: 800_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierGamma {
    pub gamma: DMatrix<f64>,
    /// Rough size of the neglected tail beyond theta_max.
    pub tail_estimate: f64,
}

const CHUNKS: usize = 64;

/// Γ(t) by Laplace inversion along Re z = λ.
///
/// Q_z⁻¹ is split as (z − λ₀)⁻¹I + G_z. The first piece inverts in closed
/// form to e^{λ₀t}I for t > 0; G_z = O(|z|⁻²) is integrated by the trapezoid
/// rule on [0, theta_max] using G_{z̄} = conj(G_z).
pub fn gamma_fourier(
    nu: &SignedMatrixMeasure,
    lambda0: f64,
    lambda: f64,
    t: f64,
    cfg: &FourierConfig,
) -> Result<FourierGamma> {
    if !(lambda > lambda0) {
        return Err(FsdeError::BelowAbscissa { lambda, lambda0 });
    }
    if !(t > 0.0) {
        return Err(FsdeError::InvalidParameter {
            name: "t",
            value: t,
            constraint: "must be positive",
        });
    }
    if !(cfg.theta_max > 0.0) || cfg.n_grid < 2 {
        return Err(FsdeError::InvalidParameter {
            name: "theta_max",
            value: cfg.theta_max,
            constraint: "need a positive range and at least two nodes",
        });
    }
    let d = nu.dim();
    let n = cfg.n_grid;
    let dth = cfg.theta_max / n as f64;
    let integrand = |i: usize| -> Result<DMatrix<Complex64>> {
        let z = Complex64::new(lambda, i as f64 * dth);
        let mut g = char_inverse(nu, z).ok_or_else(|| {
            FsdeError::RootSearch(format!("Q singular at {z} to the right of the abscissa"))
        })?;
        let pole = (z - Complex64::new(lambda0, 0.0)).inv();
        for r in 0..d {
            g[(r, r)] -= pole;
        }
        let w = if i == 0 || i == n { 0.5 } else { 1.0 };
        Ok(g * ((z * t).exp() * w))
    };
    // fixed chunking keeps the summation order independent of thread count
    let chunk = (n + 1).div_ceil(CHUNKS);
    let partial: Vec<Result<DMatrix<Complex64>>> = (0..CHUNKS)
        .into_par_iter()
        .map(|c| {
            let mut acc = DMatrix::<Complex64>::zeros(d, d);
            for i in c * chunk..((c + 1) * chunk).min(n + 1) {
                acc += integrand(i)?;
            }
            Ok(acc)
        })
        .collect();
    let mut sum = DMatrix::<Complex64>::zeros(d, d);
    for p in partial {
        sum += p?;
    }
    let mut gamma = sum.map(|v| v.re * dth / PI);
    let e0 = (lambda0 * t).exp();
    for r in 0..d {
        gamma[(r, r)] += e0;
    }
    let lm = (-lambda).max(0.0);
    let tail_estimate =
        ((lm * nu.r0()).exp() * nu.norm() + lambda0.abs()) * (lambda * t).exp() / (PI * cfg.theta_max);
    Ok(FourierGamma {
        gamma,
        tail_estimate,
    })
}
