use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{horizon_steps, initial_values, Increments, PathRecord};
use crate::error::{FsdeError, Result};
use crate::linalg;
use crate::model::{Dynamics, FsdeModel, Model, Segment, SegmentView};

/// g(s) = Δ₀e^{k₁s} / ∫₀ᵗe^{2k₁u}du.
pub fn control_g(k1: f64, delta0: f64, t: f64, s: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(FsdeError::InvalidParameter {
            name: "t",
            value: t,
            constraint: "must be positive",
        });
    }
    if delta0 == 0.0 {
        return Ok(0.0);
    }
    let x = 2.0 * k1 * t;
    let integral = if x == 0.0 { t } else { x.exp_m1() / (2.0 * k1) };
    Ok(delta0 * (k1 * s).exp() / integral)
}

/// Δ₀(e^{2k₁t−k₁s} − e^{k₁s})/(e^{2k₁t} − 1): the distance |X(s) − Y(s)| of
/// the continuous coupling, zero from s = t on.
pub fn distance_envelope(k1: f64, delta0: f64, t: f64, s: f64) -> f64 {
    if s >= t {
        return 0.0;
    }
    let (a, b) = (2.0 * k1 * (t - s), 2.0 * k1 * t);
    if b == 0.0 {
        return delta0 * (t - s) / t;
    }
    delta0 * (k1 * s).exp() * a.exp_m1() / b.exp_m1()
}

/// Output of the Girsanov coupling on [0, t + r0].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingRun {
    pub x_path: PathRecord,
    pub y_path: PathRecord,
    /// Pre-horizon t; the run covers [0, t + r0].
    pub t: f64,
    pub k1: f64,
    pub delta0: f64,
    /// First grid time with X = Y, if reached.
    pub tau: Option<f64>,
    /// True when τ came from the tolerance snap rather than an exact merge.
    pub snapped: bool,
    /// Control size per step.
    pub g_values: Vec<f64>,
    /// Girsanov drift per step, d entries each.
    pub h_values: Vec<f64>,
    /// Running log R after each step.
    pub log_r_partial: Vec<f64>,
    pub log_r: f64,
    pub r: f64,
}

impl CouplingRun {
    pub fn steps(&self) -> usize {
        self.g_values.len()
    }

    /// |X(s_k) − Y(s_k)| for k = 0..=steps.
    pub fn distances(&self) -> Vec<f64> {
        (0..=self.steps())
            .map(|k| dist(self.x_path.state(k), self.y_path.state(k)))
            .collect()
    }

    /// `t,x..,y..,dist,g,h_sq,log_r` per step after 0.
    pub fn to_csv(&self) -> String {
        let d = self.x_path.d;
        let mut s = String::from("t");
        for p in ["x", "y"] {
            for i in 0..d {
                let _ = write!(s, ",{p}{}", i + 1);
            }
        }
        s.push_str(",dist,g,h_sq,log_r\n");
        let hh = self.x_path.h();
        for k in 0..=self.steps() {
            let _ = write!(s, "{:.12e}", k as f64 * hh);
            for v in self.x_path.state(k).iter().chain(self.y_path.state(k)) {
                let _ = write!(s, ",{v:.12e}");
            }
            let (g, hsq, lr) = if k < self.steps() {
                let hv = &self.h_values[k * d..(k + 1) * d];
                (self.g_values[k], linalg::norm_sq(hv), if k == 0 { 0.0 } else { self.log_r_partial[k - 1] })
            } else {
                (0.0, 0.0, self.log_r)
            };
            let _ = writeln!(
                s,
                ",{:.12e},{g:.12e},{hsq:.12e},{lr:.12e}",
                dist(self.x_path.state(k), self.y_path.state(k))
            );
        }
        s
    }
}

#[inline]
fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Runs the coupling with X from ξ and Y from η:
///
/// dX = (Z(X) + b(X_s))ds + σdB,
/// dY = (Z(Y) + b(X_s) + 1_{[0,τ)}g(s)(X−Y)/|X−Y|)ds + σdB,
///
/// with R = exp(−∫⟨h, dB⟩ − ½∫|h|²ds), h = σ⁻¹{control + b(X_s) − b(Y_s)},
/// so that E[R·f(X_{t+r0})] = E f(X^η_{t+r0}).
///
/// On the grid the control is capped so Y lands on X exactly when one step
/// can close the gap with |control| ≤ g; distances below
/// max(1e-12, 1e-8·Δ₀) are snapped to zero.
pub fn girsanov_coupling_with(
    dynm: &Dynamics,
    k1: f64,
    xi: &Segment,
    eta: &Segment,
    t: f64,
    seed: u64,
    replica: u64,
) -> Result<CouplingRun> {
    let sigma_inv = dynm.sigma_inv()?;
    let d = dynm.d;
    let grid = dynm.grid;
    let h = grid.h;
    let n = grid.n;
    let steps = horizon_steps(t, h)? + n;
    let mut xs = initial_values(xi, grid, d)?;
    let mut ys = initial_values(eta, grid, d)?;
    xs.reserve(steps * d);
    ys.reserve(steps * d);
    let delta0 = dist(&xs[n * d..], &ys[n * d..]);
    let snap = 1e-12f64.max(1e-8 * delta0);
    let mut tau_step = (delta0 == 0.0).then_some(0usize);
    let mut snapped = false;

    let mut noise = Increments::new(seed, replica, h);
    let mut dw = vec![0.0; d];
    let (mut zx, mut zy, mut bx, mut by) = (vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]);
    let mut control = vec![0.0; d];
    let mut hv = vec![0.0; d];
    let mut next = vec![0.0; d];
    let mut g_values = Vec::with_capacity(steps);
    let mut h_values = Vec::with_capacity(steps * d);
    let mut log_r_partial = Vec::with_capacity(steps);
    let mut log_r = 0.0;

    for k in 0..steps {
        noise.fill(&mut dw);
        let cur = (k + n) * d;
        let xseg = SegmentView::new(grid, d, &xs[k * d..(k + n + 1) * d]);
        let yseg = SegmentView::new(grid, d, &ys[k * d..(k + n + 1) * d]);
        dynm.z(xseg.endpoint(), &mut zx);
        dynm.z(yseg.endpoint(), &mut zy);
        bx.fill(0.0);
        by.fill(0.0);
        dynm.b_add(xseg, &mut bx);
        dynm.b_add(yseg, &mut by);

        // X step
        for i in 0..d {
            next[i] = xs[cur + i] + h * (zx[i] + bx[i]);
        }
        dynm.sigma_add(&dw, &mut next);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(FsdeError::NonFinite { t: (k + 1) as f64 * h, h });
        }
        xs.extend_from_slice(&next);

        let mut g = 0.0;
        control.fill(0.0);
        if tau_step.is_some() {
            ys.extend_from_slice(&next);
        } else {
            g = control_g(k1, delta0, t, k as f64 * h)?;
            let dcur = dist(&xs[cur..cur + d], &ys[cur..cur + d]);
            let mut pred = 0.0;
            for i in 0..d {
                let p = xs[cur + i] - ys[cur + i] + h * (zx[i] - zy[i]);
                pred += p * p;
            }
            let merge = pred.sqrt() <= g * h;
            for i in 0..d {
                let diff = xs[cur + i] - ys[cur + i];
                control[i] = if merge {
                    (diff + h * (zx[i] - zy[i])) / h
                } else {
                    g * diff / dcur
                };
            }
            for i in 0..d {
                next[i] = ys[cur + i] + h * (zy[i] + bx[i] + control[i]);
            }
            dynm.sigma_add(&dw, &mut next);
            let xn = &xs[cur + d..cur + 2 * d];
            if merge || dist(xn, &next) <= snap {
                snapped |= !merge;
                next.copy_from_slice(xn);
                tau_step = Some(k + 1);
            }
            if next.iter().any(|v| !v.is_finite()) {
                return Err(FsdeError::NonFinite { t: (k + 1) as f64 * h, h });
            }
            ys.extend_from_slice(&next);
        }

        for i in 0..d {
            control[i] += bx[i] - by[i];
        }
        hv.fill(0.0);
        linalg::mat_vec_acc(sigma_inv, &control, &mut hv);
        log_r += -linalg::dot(&hv, &dw) - 0.5 * linalg::norm_sq(&hv) * h;
        g_values.push(g);
        h_values.extend_from_slice(&hv);
        log_r_partial.push(log_r);
    }

    Ok(CouplingRun {
        x_path: PathRecord::new(grid, d, seed, replica, xs),
        y_path: PathRecord::new(grid, d, seed, replica, ys),
        t,
        k1,
        delta0,
        tau: tau_step.map(|k| k as f64 * h),
        snapped,
        g_values,
        h_values,
        log_r_partial,
        log_r,
        r: log_r.exp(),
    })
}

/// Coupling for a model with a one-sided rate k₁ (declared or derived).
pub fn girsanov_coupling(
    m: &FsdeModel,
    xi: &Segment,
    eta: &Segment,
    t: f64,
    h: f64,
    seed: u64,
) -> Result<CouplingRun> {
    m.validate()?;
    let k1 = m
        .lipschitz()
        .ok_or(FsdeError::MissingCertificate("a Lipschitz certificate (k1, k2)"))?
        .k1;
    let dynm = m.dynamics(h)?;
    girsanov_coupling_with(&dynm, k1, xi, eta, t, seed, 0)
}
