//! Numerical falsification of the one-sided condition on sampled segment
//! pairs. A probe can refute a candidate (λ₁, λ₂) but never prove one.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::segment::{Grid, Segment};
use super::{DissipativityCert, Model};
use crate::error::Result;
use crate::linalg;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    /// Number of random piecewise-linear pairs; the same number of
    /// constant-difference pairs is added.
    pub n_pairs: usize,
    /// Knots per random segment.
    pub knots: usize,
    pub amplitude: f64,
    pub h: f64,
    /// λ₁ values for which the smallest consistent λ₂ is computed.
    pub lambda1_grid: Vec<f64>,
}

impl ProbeConfig {
    pub fn new(r0: f64, lambda1_grid: Vec<f64>) -> Self {
        Self {
            n_pairs: 2000,
            knots: 8,
            amplitude: 2.0,
            h: r0 / 64.0,
            lambda1_grid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeCandidate {
    pub lambda1: f64,
    pub lambda2: f64,
    pub rate: f64,
}

/// A sampled pair at which a candidate fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub pair: usize,
    /// 2⟨Δdrift, Δ(0)⟩.
    pub lhs: f64,
    /// λ₂‖ξ−η‖∞² − λ₁|ξ(0)−η(0)|².
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub pairs: usize,
    /// For each λ₁ on the grid, the smallest λ₂ not falsified by any pair.
    pub candidates: Vec<ProbeCandidate>,
    /// Non-falsified candidate with the largest rate.
    pub best: Option<ProbeCandidate>,
    pub status: String,
    samples: Vec<(f64, f64, f64)>,
}

impl ProbeReport {
    /// Pairs violating (λ₁, λ₂) beyond round-off.
    pub fn witnesses(&self, cert: DissipativityCert) -> Vec<Witness> {
        self.samples
            .iter()
            .enumerate()
            .filter_map(|(i, &(lhs, sup2, end2))| {
                let rhs = cert.lambda2 * sup2 - cert.lambda1 * end2;
                let scale = lhs.abs() + cert.lambda2 * sup2 + cert.lambda1 * end2;
                (lhs > rhs + 1e-12 * scale.max(1e-300)).then_some(Witness { pair: i, lhs, rhs })
            })
            .collect()
    }
}

fn random_segment(rng: &mut ChaCha8Rng, grid: Grid, d: usize, cfg: &ProbeConfig) -> Segment {
    let knots = cfg.knots.max(2);
    let vals: Vec<Vec<f64>> = (0..knots)
        .map(|_| {
            (0..d)
                .map(|_| cfg.amplitude * rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    Segment::from_fn(grid, d, |theta| {
        let pos = (theta + grid.r0) / grid.r0 * (knots - 1) as f64;
        let k = (pos.floor() as usize).min(knots - 2);
        let w = pos - k as f64;
        (0..d)
            .map(|i| (1.0 - w) * vals[k][i] + w * vals[k + 1][i])
            .collect()
    })
    .expect("finite samples")
}

pub fn probe_dissipativity(m: &dyn Model, cfg: &ProbeConfig, seed: u64) -> Result<ProbeReport> {
    let dy = m.dynamics(cfg.h)?;
    let d = m.dim();
    let grid = dy.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(2 * cfg.n_pairs);
    let mut fx = vec![0.0; d];
    let mut fy = vec![0.0; d];
    for k in 0..2 * cfg.n_pairs {
        let xi = random_segment(&mut rng, grid, d, cfg);
        let eta = if k % 2 == 0 {
            random_segment(&mut rng, grid, d, cfg)
        } else {
            let u: Vec<f64> = (0..d)
                .map(|_| cfg.amplitude * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let shift = Segment::constant(grid, &u)?;
            xi.combine(1.0, &shift, 1.0)?
        };
        dy.drift(xi.view(), &mut fx);
        dy.drift(eta.view(), &mut fy);
        let d0: Vec<f64> = xi.endpoint().iter().zip(eta.endpoint()).map(|(a, b)| a - b).collect();
        let df: Vec<f64> = fx.iter().zip(&fy).map(|(a, b)| a - b).collect();
        let lhs = 2.0 * linalg::dot(&df, &d0);
        let sup = xi.sup_dist(&eta);
        samples.push((lhs, sup * sup, linalg::norm_sq(&d0)));
    }
    let r0 = m.r0();
    let candidates: Vec<ProbeCandidate> = cfg
        .lambda1_grid
        .iter()
        .map(|&lambda1| {
            let mut lambda2 = 0.0f64;
            for &(lhs, sup2, end2) in &samples {
                if sup2 > 0.0 {
                    let need = (lhs + lambda1 * end2) / sup2;
                    let tol = 1e-12 * (lhs.abs() + lambda1 * end2) / sup2;
                    if need > tol {
                        lambda2 = lambda2.max(need);
                    }
                }
            }
            ProbeCandidate {
                lambda1,
                lambda2,
                rate: crate::certify::rate_thm11(lambda1, lambda2, r0).lambda,
            }
        })
        .collect();
    let best = candidates
        .iter()
        .copied()
        .filter(|c| c.rate > 0.0)
        .max_by(|a, b| a.rate.total_cmp(&b.rate));
    Ok(ProbeReport {
        pairs: samples.len(),
        candidates,
        best,
        status: "not falsified on sampled pairs (a probe is not a proof)".into(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DelayDrift, FsdeModel, PointDrift};
    use nalgebra::DMatrix;

    fn model(z: PointDrift, b: DelayDrift) -> FsdeModel {
        FsdeModel::new(1.0, z, b, DMatrix::identity(1, 1)).unwrap()
    }

    #[test]
    fn ou_not_falsified_at_two() {
        let m = model(PointDrift::Linear(DMatrix::from_element(1, 1, -1.0)), DelayDrift::Zero);
        let mut cfg = ProbeConfig::new(1.0, vec![0.5, 1.0, 2.0, 3.0]);
        cfg.n_pairs = 300;
        let rep = probe_dissipativity(&m, &cfg, 7).unwrap();
        let c2 = rep.candidates[2];
        assert_eq!(c2.lambda2, 0.0);
        assert!(rep.witnesses(DissipativityCert::new(2.0, 0.0).unwrap()).is_empty());
        assert_eq!(rep.best.unwrap().lambda1, 2.0);
    }

    #[test]
    fn pure_delay_falsifies_small_lambda2() {
        let m = model(
            PointDrift::Zero,
            DelayDrift::DiscreteDelay(DMatrix::from_element(1, 1, 1.0)),
        );
        let mut cfg = ProbeConfig::new(1.0, vec![0.0]);
        cfg.n_pairs = 100;
        let rep = probe_dissipativity(&m, &cfg, 1).unwrap();
        assert!(!rep.witnesses(DissipativityCert::new(0.0, 0.01).unwrap()).is_empty());
        assert!(rep.witnesses(DissipativityCert::new(0.0, 1e6).unwrap()).is_empty());
    }
}
