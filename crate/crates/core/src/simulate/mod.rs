//! Euler–Maruyama for the segment process, synchronous coupling, the
//! Girsanov coupling and the variation-of-constants path.

mod coupling;
mod noise;
mod path;
mod representation;

pub use coupling::{distance_envelope, control_g, girsanov_coupling, girsanov_coupling_with, CouplingRun};
pub use noise::{par_replicas, replica_rng, Increments};
pub use path::PathRecord;
pub use representation::representation_path;

use crate::error::{FsdeError, Result};
use crate::model::{Dynamics, Grid, Model, Segment};
use crate::model::segment::steps_of;

/// Initial segment values on `grid`, resampled by linear interpolation when
/// `xi` lives on a different grid of the same delay length.
pub(crate) fn initial_values(xi: &Segment, grid: Grid, d: usize) -> Result<Vec<f64>> {
    if xi.dim() != d {
        return Err(FsdeError::DimensionMismatch {
            expected: d,
            got: xi.dim(),
        });
    }
    let g = xi.grid();
    if (g.r0 - grid.r0).abs() > 1e-12 * grid.r0 {
        return Err(FsdeError::DelayMismatch {
            left: g.r0,
            right: grid.r0,
        });
    }
    if g.n == grid.n {
        return Ok(xi.values().to_vec());
    }
    let view = xi.view();
    let mut out = vec![0.0; grid.points() * d];
    for j in 0..grid.points() {
        view.eval(grid.theta(j), &mut out[j * d..(j + 1) * d]);
    }
    Ok(out)
}

pub(crate) fn horizon_steps(horizon: f64, h: f64) -> Result<usize> {
    steps_of("T", horizon, h)
}

/// One Euler–Maruyama step: appends X(t_{k+1}) given the buffer up to t_k.
#[inline]
pub(crate) fn euler_step(
    dynm: &Dynamics,
    states: &mut Vec<f64>,
    k: usize,
    dw: &[f64],
    drift: &mut [f64],
) -> Result<()> {
    let d = dynm.d;
    let n = dynm.grid.n;
    let h = dynm.grid.h;
    let seg = crate::model::SegmentView::new(dynm.grid, d, &states[k * d..(k + n + 1) * d]);
    dynm.drift(seg, drift);
    let cur = (k + n) * d;
    for i in 0..d {
        drift[i] = states[cur + i] + h * drift[i];
    }
    dynm.sigma_add(dw, drift);
    if drift.iter().any(|x| !x.is_finite()) {
        return Err(FsdeError::NonFinite {
            t: (k + 1) as f64 * h,
            h,
        });
    }
    states.extend_from_slice(drift);
    Ok(())
}

/// Euler–Maruyama path of replica `replica` under the stream (seed, replica).
pub fn simulate_replica(
    m: &dyn Model,
    xi: &Segment,
    horizon: f64,
    h: f64,
    seed: u64,
    replica: u64,
) -> Result<PathRecord> {
    let dynm = m.dynamics(h)?;
    simulate_with(&dynm, xi, horizon, seed, replica)
}

/// Same as `simulate_replica` with prepared dynamics, for ensemble loops.
pub fn simulate_with(
    dynm: &Dynamics,
    xi: &Segment,
    horizon: f64,
    seed: u64,
    replica: u64,
) -> Result<PathRecord> {
    let d = dynm.d;
    let grid = dynm.grid;
    let steps = horizon_steps(horizon, grid.h)?;
    let mut states = initial_values(xi, grid, d)?;
    states.reserve(steps * d);
    let mut noise = Increments::new(seed, replica, grid.h);
    let mut dw = vec![0.0; d];
    let mut buf = vec![0.0; d];
    for k in 0..steps {
        noise.fill(&mut dw);
        euler_step(dynm, &mut states, k, &dw, &mut buf)?;
    }
    Ok(PathRecord::new(grid, d, seed, replica, states))
}

/// Euler–Maruyama driven by given increments (d per step), e.g. to restart
/// a path on a later window of the same noise.
pub fn simulate_driven(dynm: &Dynamics, xi: &Segment, increments: &[f64]) -> Result<PathRecord> {
    let d = dynm.d;
    let grid = dynm.grid;
    let steps = increments.len() / d;
    let mut states = initial_values(xi, grid, d)?;
    states.reserve(steps * d);
    let mut buf = vec![0.0; d];
    for k in 0..steps {
        euler_step(dynm, &mut states, k, &increments[k * d..(k + 1) * d], &mut buf)?;
    }
    Ok(PathRecord::new(grid, d, 0, 0, states))
}

/// X(t_{k+1}) = X(t_k) + drift(X_{t_k})h + σ√h ζ_k, deterministic given the seed.
pub fn simulate(m: &dyn Model, xi: &Segment, horizon: f64, h: f64, seed: u64) -> Result<PathRecord> {
    simulate_replica(m, xi, horizon, h, seed, 0)
}

/// Two paths from ξ and η driven by identical increments.
pub fn simulate_coupled_with(
    dynm: &Dynamics,
    xi: &Segment,
    eta: &Segment,
    horizon: f64,
    seed: u64,
    replica: u64,
) -> Result<(PathRecord, PathRecord)> {
    let d = dynm.d;
    let grid = dynm.grid;
    let steps = horizon_steps(horizon, grid.h)?;
    let mut xs = initial_values(xi, grid, d)?;
    let mut ys = initial_values(eta, grid, d)?;
    xs.reserve(steps * d);
    ys.reserve(steps * d);
    let mut noise = Increments::new(seed, replica, grid.h);
    let mut dw = vec![0.0; d];
    let mut buf = vec![0.0; d];
    for k in 0..steps {
        noise.fill(&mut dw);
        euler_step(dynm, &mut xs, k, &dw, &mut buf)?;
        euler_step(dynm, &mut ys, k, &dw, &mut buf)?;
    }
    Ok((
        PathRecord::new(grid, d, seed, replica, xs),
        PathRecord::new(grid, d, seed, replica, ys),
    ))
}

pub fn simulate_coupled(
    m: &dyn Model,
    xi: &Segment,
    eta: &Segment,
    horizon: f64,
    h: f64,
    seed: u64,
) -> Result<(PathRecord, PathRecord)> {
    let dynm = m.dynamics(h)?;
    simulate_coupled_with(&dynm, xi, eta, horizon, seed, 0)
}
