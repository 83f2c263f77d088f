use super::{horizon_steps, initial_values, Increments, PathRecord};
use crate::error::{FsdeError, Result};
use crate::model::{Grid, Model, Segment, SegmentView, SemiLinearModel};
use crate::spectral::GammaTable;

const PICARD_TOL: f64 = 1e-10;
const PICARD_SWEEPS: usize = 50;

/// out += c·M·v for a row-major d×d block.
#[inline]
fn mv_acc(d: usize, m: &[f64], v: &[f64], c: f64, out: &mut [f64]) {
    for r in 0..d {
        out[r] += c * m[r * d..(r + 1) * d].iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// Σ_{i<k} Γ((k−1−i)h)·v_i for every k, i.e. a causal convolution.
fn convolve(gamma: &GammaTable, d: usize, v: &[f64], steps: usize, c: f64, out: &mut [f64]) {
    for k in 1..=steps {
        let acc = &mut out[k * d..(k + 1) * d];
        for i in 0..k {
            mv_acc(d, gamma.after(k - 1 - i), &v[i * d..(i + 1) * d], c, acc);
        }
    }
}

/// Path from the variation-of-constants formula
///
/// X(t) = Γ(t)ξ(0) + ∫ν(dθ)∫_θ^0 Γ(t+θ−s)ξ(s)ds + ∫₀ᵗΓ(t−s)b(X_s)ds + ∫₀ᵗΓ(t−s)σdB(s),
///
/// discretised on the simulation grid with the kernel read at the right end
/// of each cell, and driven by the same increments as `simulate` for the
/// same seed. A non-zero b is handled by Picard sweeps started from the
/// b = 0 path.
pub fn representation_path(
    m: &SemiLinearModel,
    gamma: &GammaTable,
    xi: &Segment,
    horizon: f64,
    h: f64,
    seed: u64,
) -> Result<PathRecord> {
    let d = m.dim();
    let grid = Grid::new(m.r0(), h)?;
    if (gamma.h - grid.h).abs() > 1e-12 * grid.h || gamma.d != d {
        return Err(FsdeError::GridMisaligned {
            what: "gamma step",
            value: gamma.h,
            h: grid.h,
        });
    }
    let steps = horizon_steps(horizon, grid.h)?;
    if gamma.len() < gamma.n + steps + 1 {
        return Err(FsdeError::HorizonTooShort {
            have: gamma.horizon,
            need: horizon,
        });
    }
    let n = grid.n;
    let init = initial_values(xi, grid, d)?;
    let st = m.nu().stencil(grid)?;

    // Γ(t_k)ξ(0) + Σ_j Σ_i Γ((k+j−i−1)h) W_j ξ(θ_i) h over history points θ_i < 0
    let mut wx: Vec<(usize, usize, Vec<f64>)> = Vec::new();
    for (j, w) in st.taps() {
        for i in *j..n {
            let mut v = vec![0.0; d];
            mv_acc(d, w, &init[i * d..(i + 1) * d], 1.0, &mut v);
            wx.push((*j, i, v));
        }
    }
    let mut base = vec![0.0; (steps + 1) * d];
    for k in 0..=steps {
        let out = &mut base[k * d..(k + 1) * d];
        mv_acc(d, gamma.after(k), &init[n * d..(n + 1) * d], 1.0, out);
        for (j, i, v) in &wx {
            if i + 1 <= k + j {
                mv_acc(d, gamma.after(k + j - i - 1), v, h, out);
            }
        }
    }

    let mut noise = Increments::new(seed, 0, grid.h);
    let mut dw = vec![0.0; d];
    let mut sdw = vec![0.0; steps * d];
    let sigma = m.sigma();
    for i in 0..steps {
        noise.fill(&mut dw);
        for r in 0..d {
            sdw[i * d + r] = (0..d).map(|c| sigma[(r, c)] * dw[c]).sum();
        }
    }
    convolve(gamma, d, &sdw, steps, 1.0, &mut base);

    let assemble = |body: &[f64]| -> Vec<f64> {
        let mut s = init.clone();
        s.extend_from_slice(&body[d..]);
        s
    };
    let mut states = assemble(&base);
    let b = m.b().compile(grid, d)?;
    if !b.is_zero() {
        let mut bvals = vec![0.0; steps * d];
        for _ in 0..PICARD_SWEEPS {
            for k in 0..steps {
                let out = &mut bvals[k * d..(k + 1) * d];
                out.fill(0.0);
                b.eval_add(SegmentView::new(grid, d, &states[k * d..(k + n + 1) * d]), out);
            }
            let mut body = base.clone();
            convolve(gamma, d, &bvals, steps, h, &mut body);
            let next = assemble(&body);
            let change = next
                .iter()
                .zip(&states)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            states = next;
            if change < PICARD_TOL {
                break;
            }
        }
    }
    if states.iter().any(|v| !v.is_finite()) {
        return Err(FsdeError::NonFinite { t: horizon, h });
    }
    Ok(PathRecord::new(grid, d, seed, 0, states))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DelayDrift, SignedMatrixMeasure};
    use crate::simulate::simulate;
    use crate::spectral::gamma_solve;
    use nalgebra::DMatrix;

    fn pure_delay(sigma: f64, b: DelayDrift) -> SemiLinearModel {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(-1.0, -(-1.0f64).exp())]).unwrap();
        SemiLinearModel::new(nu, b, DMatrix::from_element(1, 1, sigma), Some(0.2)).unwrap()
    }

    fn sup_diff(a: &PathRecord, b: &PathRecord) -> f64 {
        a.states().iter().zip(b.states()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn deterministic_constant_history() {
        let m = pure_delay(0.0, DelayDrift::Zero);
        let h = 1.0 / 256.0;
        let g = gamma_solve(m.nu(), 3.0, h).unwrap();
        let xi = Segment::constant(Grid::new(1.0, h).unwrap(), &[1.0]).unwrap();
        let p = representation_path(&m, &g, &xi, 2.0, h, 0).unwrap();
        assert_eq!(p.state(0)[0], 1.0);
        assert!((p.state(256)[0] - (1.0 - (-1.0f64).exp())).abs() < 2.0 * h);
    }

    #[test]
    fn matches_euler_with_noise_and_nonlinearity() {
        let h = 1.0 / 128.0;
        let grid = Grid::new(1.0, h).unwrap();
        let xi = Segment::from_fn(grid, 1, |t| vec![(3.0 * t).sin()]).unwrap();
        for b in [DelayDrift::Zero, DelayDrift::TanhDelay(vec![0.2])] {
            let m = pure_delay(1.0, b);
            let g = gamma_solve(m.nu(), 2.0, h).unwrap();
            let rep = representation_path(&m, &g, &xi, 2.0, h, 17).unwrap();
            let em = simulate(&m, &xi, 2.0, h, 17).unwrap();
            assert!(sup_diff(&rep, &em) < 1e-9, "{}", sup_diff(&rep, &em));
        }
    }

    #[test]
    fn dirac_at_origin_is_exponential() {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(0.0, -0.5)]).unwrap();
        let m = SemiLinearModel::new(nu, DelayDrift::Zero, DMatrix::zeros(1, 1), None).unwrap();
        let h = 1.0 / 512.0;
        let g = gamma_solve(m.nu(), 2.0, h).unwrap();
        let xi = Segment::from_fn(Grid::new(1.0, h).unwrap(), 1, |t| vec![2.0 + t]).unwrap();
        let p = representation_path(&m, &g, &xi, 2.0, h, 0).unwrap();
        assert!((p.state(1024)[0] - 2.0 * (-1.0f64).exp()).abs() < 2.0 * h);
    }

    #[test]
    fn short_table_rejected() {
        let m = pure_delay(0.0, DelayDrift::Zero);
        let h = 0.25;
        let g = gamma_solve(m.nu(), 1.0, h).unwrap();
        let xi = Segment::constant(Grid::new(1.0, h).unwrap(), &[1.0]).unwrap();
        assert!(matches!(
            representation_path(&m, &g, &xi, 2.0, h, 0),
            Err(FsdeError::HorizonTooShort { .. })
        ));
    }
}
