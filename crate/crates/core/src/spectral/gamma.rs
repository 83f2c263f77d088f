use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{FsdeError, Result};
use crate::linalg::op_norm_slice;
use crate::model::{Grid, SignedMatrixMeasure};

const BLOW_UP: f64 = 1e150;

/// Fundamental solution Γ sampled at t_i = −r0 + i·h, i = 0..len.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaTable {
    pub d: usize,
    pub r0: f64,
    pub h: f64,
    /// Steps per delay interval; Γ(0) sits at index n.
    pub n: usize,
    pub horizon: f64,
    values: Vec<f64>,
    norms: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CkEstimate {
    pub k: f64,
    pub ck: f64,
    pub horizon: f64,
    pub t_argmax: f64,
}

/// Explicit Euler for dΓ = (∫ν(dθ)Γ(t+θ))dt from Γ(0) = I, Γ ≡ 0 before 0.
pub fn gamma_solve(nu: &SignedMatrixMeasure, horizon: f64, h: f64) -> Result<GammaTable> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(FsdeError::InvalidParameter {
            name: "T",
            value: horizon,
            constraint: "must be positive",
        });
    }
    let grid = Grid::new(nu.r0(), h)?;
    let st = nu.stencil(grid)?;
    let (d, n, h) = (nu.dim(), grid.n, grid.h);
    let steps = (horizon / h - 1e-9).ceil().max(1.0) as usize;
    let len = n + steps + 1;
    let dd = d * d;
    let mut values = vec![0.0; len * dd];
    for r in 0..d {
        values[n * dd + r * d + r] = 1.0;
    }
    let mut norms = vec![0.0; len];
    norms[n] = 1.0;
    let mut acc = vec![0.0; dd];
    for i in n..len - 1 {
        acc.fill(0.0);
        let base = i - n;
        for (j, w) in st.taps() {
            let g = &values[(base + j) * dd..(base + j + 1) * dd];
            // acc += W_j · Γ
            for r in 0..d {
                for c in 0..d {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += w[r * d + k] * g[k * d + c];
                    }
                    acc[r * d + c] += s;
                }
            }
        }
        let (head, tail) = values.split_at_mut((i + 1) * dd);
        let cur = &head[i * dd..];
        let next = &mut tail[..dd];
        for k in 0..dd {
            next[k] = cur[k] + h * acc[k];
        }
        let nn = op_norm_slice(d, next);
        if !(nn <= BLOW_UP) {
            return Err(FsdeError::GammaBlowUp {
                t: (i + 1 - n) as f64 * h,
            });
        }
        norms[i + 1] = nn;
    }
    Ok(GammaTable {
        d,
        r0: grid.r0,
        h,
        n,
        horizon: steps as f64 * h,
        values,
        norms,
    })
}

impl GammaTable {
    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    #[inline]
    pub fn time(&self, i: usize) -> f64 {
        (i as f64 - self.n as f64) * self.h
    }

    /// Row-major Γ(t_i).
    #[inline]
    pub fn at_index(&self, i: usize) -> &[f64] {
        let dd = self.d * self.d;
        &self.values[i * dd..(i + 1) * dd]
    }

    /// Γ(t_n+k) for k steps after 0.
    #[inline]
    pub fn after(&self, k: usize) -> &[f64] {
        self.at_index(self.n + k)
    }

    pub fn norm_at_index(&self, i: usize) -> f64 {
        self.norms[i]
    }

    /// Γ(t) by linear interpolation, or None outside the table.
    pub fn at(&self, t: f64) -> Option<DMatrix<f64>> {
        let pos = t / self.h + self.n as f64;
        if !(pos >= -1e-9) || pos > (self.len() - 1) as f64 + 1e-9 {
            return None;
        }
        let i = (pos.floor() as usize).min(self.len() - 1);
        let f = (pos - i as f64).clamp(0.0, 1.0);
        let a = self.at_index(i);
        let m = if f < 1e-12 || i + 1 == self.len() {
            a.to_vec()
        } else {
            let b = self.at_index(i + 1);
            a.iter().zip(b).map(|(x, y)| x + f * (y - x)).collect()
        };
        Some(DMatrix::from_row_slice(self.d, self.d, &m))
    }

    /// c_k = max over tabulated t ≥ 0 of ‖Γ(t)‖e^{kt}.
    pub fn ck_empirical(&self, k: f64) -> CkEstimate {
        let mut best = (1.0, 0.0);
        for i in self.n..self.len() {
            let t = self.time(i);
            let v = self.norms[i] * (k * t).exp();
            if v > best.0 {
                best = (v, t);
            }
        }
        CkEstimate {
            k,
            ck: best.0,
            horizon: self.horizon,
            t_argmax: best.1,
        }
    }

    /// Header `t,g11,g12,...,norm` and one row per grid time.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for r in 0..self.d {
            for c in 0..self.d {
                let _ = write!(s, ",g{}{}", r + 1, c + 1);
            }
        }
        s.push_str(",norm\n");
        for i in 0..self.len() {
            let _ = write!(s, "{:.12e}", self.time(i));
            for v in self.at_index(i) {
                let _ = write!(s, ",{v:.12e}");
            }
            let _ = writeln!(s, ",{:.12e}", self.norms[i]);
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scalar_ode_decay() {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(0.0, -1.0)]).unwrap();
        let h = 1.0 / 256.0;
        let g = gamma_solve(&nu, 3.0, h).unwrap();
        for t in [0.5, 1.0, 3.0] {
            let v = g.at(t).unwrap()[(0, 0)];
            assert!((v - (-t).exp()).abs() < h, "t={t}");
        }
        assert_eq!(g.at_index(g.n)[0], 1.0);
        assert!(g.at_index(0)[0] == 0.0 && g.at_index(g.n - 1)[0] == 0.0);
    }

    #[test]
    fn pure_delay_method_of_steps() {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(-1.0, -(-1.0f64).exp())]).unwrap();
        let h = 1.0 / 512.0;
        let g = gamma_solve(&nu, 2.0, h).unwrap();
        assert_eq!(g.at(1.0).unwrap()[(0, 0)], 1.0);
        let want = 1.0 - (-1.0f64).exp();
        assert!((g.at(2.0).unwrap()[(0, 0)] - want).abs() < 2.0 * h);
        assert_eq!(g.ck_empirical(0.0).ck, 1.0);
    }

    #[test]
    fn zero_measure_is_identity() {
        let nu = SignedMatrixMeasure::zero(0.5, 2).unwrap();
        let g = gamma_solve(&nu, 1.0, 0.5 / 8.0).unwrap();
        assert_eq!(g.at(1.0).unwrap(), DMatrix::identity(2, 2));
    }

    #[test]
    fn ck_monotone_and_unit_for_symmetric() {
        let nu = SignedMatrixMeasure::dirac(1.0, 0.0, -DMatrix::identity(2, 2)).unwrap();
        let g = gamma_solve(&nu, 5.0, 1.0 / 128.0).unwrap();
        assert_eq!(g.ck_empirical(1.0).ck, 1.0);
        let ks: Vec<f64> = (0..20).map(|i| -0.5 + 0.1 * i as f64).collect();
        let cs: Vec<f64> = ks.iter().map(|&k| g.ck_empirical(k).ck).collect();
        assert!(cs.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn blow_up_reported() {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(0.0, 400.0)]).unwrap();
        match gamma_solve(&nu, 10.0, 1.0 / 16.0) {
            Err(FsdeError::GammaBlowUp { t }) => assert!(t > 0.0 && t < 10.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn csv_shape() {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(0.0, -1.0)]).unwrap();
        let g = gamma_solve(&nu, 1.0, 0.25).unwrap();
        let csv = g.to_csv();
        assert!(csv.starts_with("t,g11,norm\n"));
        assert_eq!(csv.lines().count(), 1 + g.len());
    }
}
