use serde::{Deserialize, Serialize};

use crate::error::{FsdeError, Result};
use crate::linalg;

/// Uniform grid θ_j = −r0 + j·h, j = 0..=n, on the delay interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub r0: f64,
    pub h: f64,
    pub n: usize,
}

const ALIGN_TOL: f64 = 1e-9;

/// Returns k when `value` is within rounding of k·h.
pub(crate) fn steps_of(what: &'static str, value: f64, h: f64) -> Result<usize> {
    if !(value >= 0.0) || !value.is_finite() {
        return Err(FsdeError::InvalidParameter {
            name: what,
            value,
            constraint: "must be finite and non-negative",
        });
    }
    let k = (value / h).round();
    if (k * h - value).abs() > ALIGN_TOL * value.max(h) {
        return Err(FsdeError::GridMisaligned { what, value, h });
    }
    Ok(k as usize)
}

impl Grid {
    pub fn new(r0: f64, h: f64) -> Result<Self> {
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(FsdeError::InvalidParameter {
                name: "r0",
                value: r0,
                constraint: "must be positive",
            });
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(FsdeError::InvalidParameter {
                name: "h",
                value: h,
                constraint: "must be positive",
            });
        }
        let n = steps_of("r0", r0, h)?;
        if n == 0 {
            return Err(FsdeError::GridMisaligned { what: "r0", value: r0, h });
        }
        Ok(Self { r0, h: r0 / n as f64, n })
    }

    /// Grid with `n` cells on [−r0, 0].
    pub fn with_cells(r0: f64, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(FsdeError::InvalidParameter {
                name: "n",
                value: 0.0,
                constraint: "need at least one cell",
            });
        }
        Self::new(r0, r0 / n as f64)
    }

    #[inline]
    pub fn theta(&self, j: usize) -> f64 {
        -self.r0 + j as f64 * self.h
    }

    #[inline]
    pub fn points(&self) -> usize {
        self.n + 1
    }
}

/// A discretised path segment ξ ∈ C([−r0,0]; ℝ^d), piecewise linear between
/// grid points. Values are stored point-major: `values[j*d + i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    grid: Grid,
    d: usize,
    values: Vec<f64>,
}

impl Segment {
    pub fn new(grid: Grid, d: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(FsdeError::DimensionMismatch { expected: 1, got: 0 });
        }
        if values.len() != grid.points() * d {
            return Err(FsdeError::DimensionMismatch {
                expected: grid.points() * d,
                got: values.len(),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(FsdeError::NonFinite {
                t: grid.theta(pos / d),
                h: grid.h,
            });
        }
        Ok(Self { grid, d, values })
    }

    pub fn constant(grid: Grid, x: &[f64]) -> Result<Self> {
        let values = (0..grid.points()).flat_map(|_| x.iter().copied()).collect();
        Self::new(grid, x.len(), values)
    }

    pub fn from_fn(grid: Grid, d: usize, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.points() * d);
        for j in 0..grid.points() {
            let v = f(grid.theta(j));
            if v.len() != d {
                return Err(FsdeError::DimensionMismatch {
                    expected: d,
                    got: v.len(),
                });
            }
            values.extend(v);
        }
        Self::new(grid, d, values)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn view(&self) -> SegmentView<'_> {
        SegmentView {
            grid: self.grid,
            d: self.d,
            values: &self.values,
        }
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    pub fn endpoint(&self) -> &[f64] {
        self.point(self.grid.n)
    }

    pub fn sup_norm(&self) -> f64 {
        self.view().sup_norm()
    }

    pub fn sup_dist(&self, other: &Segment) -> f64 {
        self.view().sup_dist(&other.view())
    }

    /// Pointwise linear combination a·self + b·other.
    pub fn combine(&self, a: f64, other: &Segment, b: f64) -> Result<Segment> {
        if self.grid != other.grid || self.d != other.d {
            return Err(FsdeError::DelayMismatch {
                left: self.grid.r0,
                right: other.grid.r0,
            });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Segment::new(self.grid, self.d, values)
    }
}

/// Borrowed segment, typically a window into a longer path buffer.
#[derive(Debug, Clone, Copy)]
pub struct SegmentView<'a> {
    pub grid: Grid,
    pub d: usize,
    pub values: &'a [f64],
}

impl<'a> SegmentView<'a> {
    pub fn new(grid: Grid, d: usize, values: &'a [f64]) -> Self {
        debug_assert_eq!(values.len(), grid.points() * d);
        Self { grid, d, values }
    }

    #[inline]
    pub fn point(&self, j: usize) -> &'a [f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    #[inline]
    pub fn endpoint(&self) -> &'a [f64] {
        self.point(self.grid.n)
    }

    /// Oldest value ξ(−r0).
    #[inline]
    pub fn oldest(&self) -> &'a [f64] {
        self.point(0)
    }

    /// Linear interpolation at θ ∈ [−r0, 0].
    pub fn eval(&self, theta: f64, out: &mut [f64]) {
        let pos = ((theta + self.grid.r0) / self.grid.h).clamp(0.0, self.grid.n as f64);
        let j0 = (pos.floor() as usize).min(self.grid.n);
        let frac = pos - j0 as f64;
        let a = self.point(j0);
        if frac <= 1e-12 || j0 == self.grid.n {
            out.copy_from_slice(a);
        } else {
            let b = self.point(j0 + 1);
            for i in 0..self.d {
                out[i] = (1.0 - frac) * a[i] + frac * b[i];
            }
        }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values
            .chunks_exact(self.d)
            .map(linalg::norm_sq)
            .fold(0.0, f64::max)
            .sqrt()
    }

    pub fn sup_dist(&self, other: &SegmentView<'_>) -> f64 {
        self.values
            .chunks_exact(self.d)
            .zip(other.values.chunks_exact(self.d))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
            .fold(0.0, f64::max)
            .sqrt()
    }

    pub fn to_segment(&self) -> Segment {
        Segment {
            grid: self.grid,
            d: self.d,
            values: self.values.to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_alignment_enforced() {
        assert!(Grid::new(1.0, 0.25).is_ok());
        assert!(matches!(
            Grid::new(1.0, 0.3),
            Err(FsdeError::GridMisaligned { .. })
        ));
        assert!(Grid::new(1.0, 0.0).is_err());
        let g = Grid::new(1.0, 1.0 / 256.0).unwrap();
        assert_eq!(g.n, 256);
        assert_eq!(g.n as f64 * g.h, g.r0);
    }

    #[test]
    fn interpolation_between_points() {
        let g = Grid::new(1.0, 0.5).unwrap();
        let s = Segment::from_fn(g, 1, |t| vec![t + 1.0]).unwrap();
        let mut out = [0.0];
        s.view().eval(-0.75, &mut out);
        assert!((out[0] - 0.25).abs() < 1e-15);
        s.view().eval(-1.0, &mut out);
        assert_eq!(out[0], 0.0);
        s.view().eval(0.0, &mut out);
        assert_eq!(out[0], 1.0);
    }

    #[test]
    fn rejects_non_finite() {
        let g = Grid::new(1.0, 0.5).unwrap();
        assert!(Segment::new(g, 1, vec![0.0, f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn sup_norm_euclidean_per_point() {
        let g = Grid::new(1.0, 1.0).unwrap();
        let s = Segment::new(g, 2, vec![3.0, 4.0, 1.0, 0.0]).unwrap();
        assert!((s.sup_norm() - 5.0).abs() < 1e-15);
    }
}
