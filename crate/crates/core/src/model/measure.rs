use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::segment::{Grid, SegmentView};
use crate::error::{FsdeError, Result};

/// Point mass A·δ_θ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub theta: f64,
    pub matrix: DMatrix<f64>,
}

/// Matrix-valued density, constant on `cells.len()` equal cells of [−r0, 0].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseDensity {
    pub cells: Vec<DMatrix<f64>>,
}

impl PiecewiseDensity {
    pub fn cell_width(&self, r0: f64) -> f64 {
        r0 / self.cells.len() as f64
    }

    /// Density value at θ; the right endpoint 0 belongs to the last cell.
    pub fn at(&self, r0: f64, theta: f64) -> &DMatrix<f64> {
        let m = self.cells.len();
        let k = (((theta + r0) / r0) * m as f64).floor().clamp(0.0, (m - 1) as f64) as usize;
        &self.cells[k]
    }
}

/// A finite ℝ^{d×d}-valued signed measure on [−r0, 0]: atoms plus an
/// optional piecewise-constant density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedMatrixMeasure {
    r0: f64,
    d: usize,
    atoms: Vec<Atom>,
    density: Option<PiecewiseDensity>,
}

impl SignedMatrixMeasure {
    pub fn new(
        r0: f64,
        d: usize,
        atoms: Vec<Atom>,
        density: Option<PiecewiseDensity>,
    ) -> Result<Self> {
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(FsdeError::InvalidParameter {
                name: "r0",
                value: r0,
                constraint: "must be positive",
            });
        }
        let check_dim = |m: &DMatrix<f64>| -> Result<()> {
            if m.nrows() != d || m.ncols() != d {
                return Err(FsdeError::DimensionMismatch {
                    expected: d,
                    got: m.nrows().max(m.ncols()),
                });
            }
            if m.iter().any(|x| !x.is_finite()) {
                return Err(FsdeError::InvalidParameter {
                    name: "measure entry",
                    value: f64::NAN,
                    constraint: "must be finite",
                });
            }
            Ok(())
        };
        for a in &atoms {
            if !(a.theta >= -r0 - 1e-12 * r0 && a.theta <= 0.0) {
                return Err(FsdeError::AtomOutsideSupport { theta: a.theta, r0 });
            }
            check_dim(&a.matrix)?;
        }
        let atoms = atoms
            .into_iter()
            .map(|a| Atom {
                theta: a.theta.max(-r0),
                matrix: a.matrix,
            })
            .collect();
        if let Some(dens) = &density {
            if dens.cells.is_empty() {
                return Err(FsdeError::InvalidParameter {
                    name: "density cells",
                    value: 0.0,
                    constraint: "need at least one cell",
                });
            }
            for c in &dens.cells {
                check_dim(c)?;
            }
        }
        Ok(Self {
            r0,
            d,
            atoms,
            density,
        })
    }

    pub fn zero(r0: f64, d: usize) -> Result<Self> {
        Self::new(r0, d, Vec::new(), None)
    }

    pub fn dirac(r0: f64, theta: f64, matrix: DMatrix<f64>) -> Result<Self> {
        let d = matrix.nrows();
        Self::new(r0, d, vec![Atom { theta, matrix }], None)
    }

    /// Scalar (d = 1) measure from (θ, weight) pairs.
    pub fn scalar_atoms(r0: f64, atoms: &[(f64, f64)]) -> Result<Self> {
        let atoms = atoms
            .iter()
            .map(|&(theta, w)| Atom {
                theta,
                matrix: DMatrix::from_element(1, 1, w),
            })
            .collect();
        Self::new(r0, 1, atoms, None)
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&PiecewiseDensity> {
        self.density.as_ref()
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.matrix.iter().all(|&x| x == 0.0))
            && self
                .density
                .as_ref()
                .is_none_or(|dn| dn.cells.iter().all(|c| c.iter().all(|&x| x == 0.0)))
    }

    /// Some(A) when ν = A·δ₀ (possibly after merging several atoms at 0).
    pub fn origin_only(&self) -> Option<DMatrix<f64>> {
        if self.density.is_some() {
            return None;
        }
        let mut a = DMatrix::zeros(self.d, self.d);
        for atom in &self.atoms {
            if atom.theta != 0.0 {
                if atom.matrix.iter().any(|&x| x != 0.0) {
                    return None;
                }
                continue;
            }
            a += &atom.matrix;
        }
        Some(a)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            r0: self.r0,
            d: self.d,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    theta: a.theta,
                    matrix: &a.matrix * c,
                })
                .collect(),
            density: self.density.as_ref().map(|dn| PiecewiseDensity {
                cells: dn.cells.iter().map(|m| m * c).collect(),
            }),
        }
    }

    /// Entrywise total variation |ν_ij|([−r0, 0]).
    pub fn total_variation_matrix(&self) -> DMatrix<f64> {
        let mut tv = DMatrix::zeros(self.d, self.d);
        for a in &self.atoms {
            tv += a.matrix.abs();
        }
        if let Some(dn) = &self.density {
            let w = dn.cell_width(self.r0);
            for c in &dn.cells {
                tv += c.abs() * w;
            }
        }
        tv
    }

    /// ‖ν‖ = max_i (Σ_j |ν_ij|([−r0,0])²)^{1/2}.
    pub fn norm(&self) -> f64 {
        let tv = self.total_variation_matrix();
        tv.row_iter()
            .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Quadrature weights for ∫ν(dθ)ξ(θ) on `grid`.
    pub fn stencil(&self, grid: Grid) -> Result<MeasureStencil> {
        if (grid.r0 - self.r0).abs() > 1e-12 * self.r0 {
            return Err(FsdeError::DelayMismatch {
                left: self.r0,
                right: grid.r0,
            });
        }
        let mut st = MeasureStencil::new(self.d, grid.points());
        for a in &self.atoms {
            let pos = ((a.theta + grid.r0) / grid.h).clamp(0.0, grid.n as f64);
            let j0 = pos.floor() as usize;
            let frac = pos - j0 as f64;
            if frac <= 1e-9 || j0 >= grid.n {
                st.add(j0.min(grid.n), &a.matrix, 1.0);
            } else if frac >= 1.0 - 1e-9 {
                st.add(j0 + 1, &a.matrix, 1.0);
            } else {
                st.add(j0, &a.matrix, 1.0 - frac);
                st.add(j0 + 1, &a.matrix, frac);
            }
        }
        if let Some(dn) = &self.density {
            for k in 0..grid.n {
                let mid = grid.theta(k) + 0.5 * grid.h;
                let m = dn.at(self.r0, mid);
                st.add(k, m, 0.5 * grid.h);
                st.add(k + 1, m, 0.5 * grid.h);
            }
        }
        st.compact();
        Ok(st)
    }

    /// ∫ν(dθ)ξ(θ): atoms read interpolated values, density by trapezoid rule.
    pub fn apply(&self, seg: SegmentView<'_>) -> Result<Vec<f64>> {
        if seg.d != self.d {
            return Err(FsdeError::DimensionMismatch {
                expected: self.d,
                got: seg.d,
            });
        }
        let st = self.stencil(seg.grid)?;
        let mut out = vec![0.0; self.d];
        st.apply(seg, &mut out);
        Ok(out)
    }
}

/// Grid weights W_j with ∫ν(dθ)ξ(θ) ≈ Σ_j W_j ξ(θ_j).
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureStencil {
    d: usize,
    taps: Vec<(usize, Vec<f64>)>,
    dense: Vec<Option<Vec<f64>>>,
}

impl MeasureStencil {
    fn new(d: usize, points: usize) -> Self {
        Self {
            d,
            taps: Vec::new(),
            dense: vec![None; points],
        }
    }

    fn add(&mut self, j: usize, m: &DMatrix<f64>, w: f64) {
        let d = self.d;
        let slot = self.dense[j].get_or_insert_with(|| vec![0.0; d * d]);
        for r in 0..d {
            for c in 0..d {
                slot[r * d + c] += w * m[(r, c)];
            }
        }
    }

    fn compact(&mut self) {
        self.taps = self
            .dense
            .drain(..)
            .enumerate()
            .filter_map(|(j, w)| w.filter(|w| w.iter().any(|&x| x != 0.0)).map(|w| (j, w)))
            .collect();
    }

    /// Non-zero taps (grid index, row-major d×d weight).
    pub fn taps(&self) -> &[(usize, Vec<f64>)] {
        &self.taps
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    /// out += Σ_j W_j ξ(θ_j).
    #[inline]
    pub fn apply(&self, seg: SegmentView<'_>, out: &mut [f64]) {
        self.apply_with(|j| seg.point(j), out)
    }

    /// Same as `apply`, reading grid values through `point(j)`.
    #[inline]
    pub fn apply_with<'a>(&self, point: impl Fn(usize) -> &'a [f64], out: &mut [f64]) {
        let d = self.d;
        for (j, w) in &self.taps {
            let x = point(*j);
            if d == 1 {
                out[0] += w[0] * x[0];
                continue;
            }
            for r in 0..d {
                let row = &w[r * d..(r + 1) * d];
                out[r] += row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::segment::Segment;

    fn e_inv() -> f64 {
        (-1.0f64).exp()
    }

    #[test]
    fn dirac_at_origin_reads_endpoint() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, -1.0]);
        let nu = SignedMatrixMeasure::dirac(1.0, 0.0, a.clone()).unwrap();
        let g = Grid::new(1.0, 0.125).unwrap();
        let seg = Segment::constant(g, &[1.0, 3.0]).unwrap();
        let v = nu.apply(seg.view()).unwrap();
        assert_eq!(v, vec![7.0, -3.0]);
    }

    #[test]
    fn delayed_atom_on_linear_segment() {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(-1.0, -e_inv())]).unwrap();
        let g = Grid::new(1.0, 0.01).unwrap();
        let seg = Segment::from_fn(g, 1, |t| vec![t + 1.0]).unwrap();
        assert_eq!(nu.apply(seg.view()).unwrap()[0], 0.0);
    }

    #[test]
    fn unit_density_integrates_constant() {
        let nu = SignedMatrixMeasure::new(
            1.0,
            1,
            vec![],
            Some(PiecewiseDensity {
                cells: vec![DMatrix::from_element(1, 1, 1.0); 8],
            }),
        )
        .unwrap();
        let g = Grid::new(1.0, 1.0 / 64.0).unwrap();
        let seg = Segment::constant(g, &[1.0]).unwrap();
        assert!((nu.apply(seg.view()).unwrap()[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn off_grid_atom_interpolates() {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(-0.3, 2.0)]).unwrap();
        let g = Grid::new(1.0, 0.25).unwrap();
        let seg = Segment::from_fn(g, 1, |t| vec![t * t]).unwrap();
        // linear interpolation between θ = −0.5 and −0.25
        let want = 2.0 * (0.2 * 0.25 + 0.8 * 0.0625);
        assert!((nu.apply(seg.view()).unwrap()[0] - want).abs() < 1e-14);
    }

    #[test]
    fn norms() {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(-1.0, -e_inv())]).unwrap();
        assert!((nu.norm() - e_inv()).abs() < 1e-16);
        let a = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 3.0]);
        assert_eq!(SignedMatrixMeasure::dirac(1.0, 0.0, a).unwrap().norm(), 3.0);
        let two = SignedMatrixMeasure::scalar_atoms(1.0, &[(0.0, 0.5), (-1.0, -0.5)]).unwrap();
        assert_eq!(two.norm(), 1.0);
    }

    #[test]
    fn rejects_atom_outside_support() {
        let err = SignedMatrixMeasure::scalar_atoms(1.0, &[(-2.0, 1.0)]).unwrap_err();
        assert!(matches!(err, FsdeError::AtomOutsideSupport { .. }));
        assert!(SignedMatrixMeasure::scalar_atoms(1.0, &[(0.5, 1.0)]).is_err());
    }

    #[test]
    fn delay_mismatch() {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(0.0, 1.0)]).unwrap();
        let g = Grid::new(2.0, 0.5).unwrap();
        let seg = Segment::constant(g, &[1.0]).unwrap();
        assert!(matches!(
            nu.apply(seg.view()),
            Err(FsdeError::DelayMismatch { .. })
        ));
    }

    #[test]
    fn origin_only_detection() {
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(0.0, -3.0), (-1.0, 1.0)]).unwrap();
        assert!(nu.origin_only().is_none());
        let nu = SignedMatrixMeasure::scalar_atoms(1.0, &[(0.0, -3.0), (0.0, 1.0)]).unwrap();
        assert_eq!(nu.origin_only().unwrap()[(0, 0)], -2.0);
    }
}
