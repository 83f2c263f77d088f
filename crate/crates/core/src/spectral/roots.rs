//! Rightmost root of det Q_z = 0 by the argument principle on vertical
//! strips, scanned from the right.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::charmat::{char_det, char_inverse, char_matrix_derivative};
use crate::error::{FsdeError, Result};
use crate::model::SignedMatrixMeasure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootSearchConfig {
    /// Target accuracy for λ₀.
    pub tol: f64,
    /// Search stops below Re z = −r_max.
    pub r_max: Option<f64>,
    pub strip_width: f64,
}

impl Default for RootSearchConfig {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            r_max: None,
            strip_width: 0.5,
        }
    }
}

/// Rectangle [re_lo, re_hi] × [im_lo, im_hi] with its zero count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxCount {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
    pub count: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharRootResult {
    pub lambda0: f64,
    /// (re, im) of a root with real part λ₀.
    pub witness_root: Option<(f64, f64)>,
    pub det_at_root: f64,
    pub multiplicity: i64,
    /// Union of scanned strips, known to hold no root right of λ₀.
    pub search_box: Option<BoxCount>,
    pub counts: Vec<BoxCount>,
    pub method: String,
}

const SPLIT: f64 = 0.4631;
const EDGE_OFFSET: f64 = 0.0137;

struct Counter<'a> {
    nu: &'a SignedMatrixMeasure,
    evals: usize,
}

enum Winding {
    Count(i64),
    /// Contour passes (numerically) through a root.
    Degenerate,
}

const MAX_STEP: f64 = 0.05;
const MAX_ARG_STEP: f64 = 0.5;

impl Counter<'_> {
    /// det Q_z and its logarithmic derivative tr(Q⁻¹Q').
    fn eval(&mut self, z: Complex64) -> Option<(Complex64, Complex64)> {
        self.evals += 1;
        let f = char_det(self.nu, z);
        if !(f.norm() > 1e-300) || !f.norm().is_finite() {
            return None;
        }
        let inv = char_inverse(self.nu, z)?;
        let l = (inv * char_matrix_derivative(self.nu, z)).trace();
        l.norm().is_finite().then_some((f, l))
    }

    /// Total argument change of det Q along [a, c]. Steps are kept below
    /// 0.2/|f'/f|, a proxy for the distance to the nearest root.
    fn edge(&mut self, a: Complex64, c: Complex64) -> Option<f64> {
        let len = (c - a).norm();
        let dir = (c - a) / len;
        let min_step = 1e-14 * (1.0 + a.norm().max(c.norm()));
        let (mut f, mut l) = self.eval(a)?;
        let mut s = 0.0;
        let mut total = 0.0;
        while s < len {
            let mut step = (0.2 / l.norm()).min(MAX_STEP).min(len - s);
            loop {
                let z = a + dir * (s + step);
                let (f1, l1) = self.eval(z)?;
                let darg = (f1 / f).arg();
                let ok = darg.abs() < MAX_ARG_STEP && step <= 0.4 / l1.norm();
                if ok || step < min_step {
                    if !ok {
                        return None;
                    }
                    total += darg;
                    s += step;
                    f = f1;
                    l = l1;
                    break;
                }
                step *= 0.5;
            }
        }
        Some(total)
    }

    fn winding(&mut self, b: &BoxCount) -> Winding {
        let corners = [
            Complex64::new(b.re_lo, b.im_lo),
            Complex64::new(b.re_hi, b.im_lo),
            Complex64::new(b.re_hi, b.im_hi),
            Complex64::new(b.re_lo, b.im_hi),
        ];
        let mut total = 0.0;
        for k in 0..4 {
            match self.edge(corners[k], corners[(k + 1) % 4]) {
                Some(d) => total += d,
                None => return Winding::Degenerate,
            }
        }
        let n = total / (2.0 * PI);
        let r = n.round();
        if (n - r).abs() > 0.05 {
            return Winding::Degenerate;
        }
        Winding::Count(r as i64)
    }

    /// Count zeros, nudging the box outward on degeneracy.
    fn count(&mut self, mut b: BoxCount) -> Result<BoxCount> {
        for attempt in 0..8 {
            match self.winding(&b) {
                Winding::Count(c) => {
                    b.count = c;
                    return Ok(b);
                }
                Winding::Degenerate => {
                    let eps = 1e-7 * (1 + attempt) as f64 * (b.re_hi - b.re_lo).max(1e-3);
                    b.re_lo -= eps * 0.618;
                    b.re_hi += eps;
                    b.im_lo -= eps * 0.382;
                    b.im_hi += eps * 0.777;
                }
            }
        }
        Err(FsdeError::RootSearch(format!(
            "winding number inconsistent on box [{}, {}] x [{}, {}]",
            b.re_lo, b.re_hi, b.im_lo, b.im_hi
        )))
    }
}

/// |Im z| bound for roots with Re z ≥ a: |z| ≤ e^{a⁻r0}·‖|ν|‖_F.
fn im_bound(frob: f64, r0: f64, a: f64) -> f64 {
    (a.min(0.0) * -r0).exp() * frob + 1.0
}

/// Newton on det with the multiplicity-aware step z ← z − m / tr(Q⁻¹Q').
fn polish(nu: &SignedMatrixMeasure, mut z: Complex64, m: i64, tol: f64) -> Complex64 {
    let m = m.max(1) as f64;
    for _ in 0..100 {
        let Some(inv) = char_inverse(nu, z) else {
            break;
        };
        let dq = char_matrix_derivative(nu, z);
        let tr = (inv * dq).trace();
        if !(tr.norm() > 0.0) || !tr.norm().is_finite() {
            break;
        }
        let step = m / tr;
        z -= step;
        if step.norm() < tol * 1e-3 * (1.0 + z.norm()) {
            break;
        }
    }
    z
}

/// Spectral abscissa λ₀ = sup{Re z : det Q_z = 0}.
pub fn lambda0(nu: &SignedMatrixMeasure, cfg: &RootSearchConfig) -> Result<CharRootResult> {
    if let Some(a) = nu.origin_only() {
        // only atoms at 0: the roots are the eigenvalues of A
        let (re, im) = if a.nrows() == 1 {
            (a[(0, 0)], 0.0)
        } else {
            a.complex_eigenvalues()
                .iter()
                .map(|z| (z.re, z.im))
                .fold((f64::NEG_INFINITY, 0.0), |acc, z| if z.0 > acc.0 { z } else { acc })
        };
        let det = char_det(nu, Complex64::new(re, im)).norm();
        return Ok(CharRootResult {
            lambda0: re,
            witness_root: Some((re, im)),
            det_at_root: det,
            multiplicity: 1,
            search_box: None,
            counts: Vec::new(),
            method: "eigenvalues".into(),
        });
    }

    let r0 = nu.r0();
    let tv = nu.total_variation_matrix();
    let frob = tv.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r_max = cfg.r_max.unwrap_or(10.0 * (nu.norm() + 1.0));
    let mut counter = Counter { nu, evals: 0 };
    let mut counts = Vec::new();
    let right = frob + 1.0 + EDGE_OFFSET;
    let mut hi = right;
    let strip = loop {
        let lo = hi - cfg.strip_width;
        if lo < -r_max {
            return Err(FsdeError::RootSearch(format!(
                "no root with real part above {lo:.3}; raise r_max"
            )));
        }
        let h = im_bound(frob, r0, lo);
        let b = counter.count(BoxCount {
            re_lo: lo,
            re_hi: hi,
            im_lo: -h,
            im_hi: h * 0.9973,
            count: 0,
        })?;
        counts.push(b);
        if b.count > 0 {
            break b;
        }
        hi = b.re_lo;
    };

    // narrow the real range, keeping the rightmost part that holds roots
    let mut cur = strip;
    let target = (cfg.tol.max(1e-12) * 1e3).max(1e-6);
    while cur.re_hi - cur.re_lo > target {
        let mid = cur.re_lo + (1.0 - SPLIT) * (cur.re_hi - cur.re_lo);
        let right_box = counter.count(BoxCount { re_lo: mid, ..cur })?;
        if right_box.count > 0 {
            cur = right_box;
        } else {
            cur.re_hi = right_box.re_lo;
            cur = counter.count(cur)?;
            if cur.count == 0 {
                return Err(FsdeError::RootSearch("root lost during bisection".into()));
            }
        }
    }
    // then the imaginary range
    while cur.im_hi - cur.im_lo > target {
        let mid = cur.im_lo + SPLIT * (cur.im_hi - cur.im_lo);
        let upper = counter.count(BoxCount { im_lo: mid, ..cur })?;
        cur = if upper.count > 0 {
            upper
        } else {
            counter.count(BoxCount { im_hi: upper.im_lo, ..cur })?
        };
        if cur.count == 0 {
            return Err(FsdeError::RootSearch("root lost during bisection".into()));
        }
    }
    let z0 = Complex64::new(0.5 * (cur.re_lo + cur.re_hi), 0.5 * (cur.im_lo + cur.im_hi));
    let z = polish(nu, z0, cur.count, cfg.tol);
    let z = if (z - z0).norm() > 10.0 * target { z0 } else { z };
    let z = if z.im.abs() < cfg.tol { Complex64::new(z.re, 0.0) } else { z };
    counts.push(cur);
    Ok(CharRootResult {
        lambda0: z.re,
        witness_root: Some((z.re, z.im)),
        det_at_root: char_det(nu, z).norm(),
        multiplicity: cur.count,
        search_box: Some(BoxCount {
            re_lo: strip.re_lo,
            re_hi: right,
            im_lo: strip.im_lo,
            im_hi: strip.im_hi,
            count: counts.iter().take(counts.len() - 1).map(|c| c.count).sum(),
        }),
        counts,
        method: "argument-principle".into(),
    })
}
