//! Built-in drift families with analytically known constants, plus
//! user callables. Callables must be pure: no hidden state, same output
//! for the same input, safe to call from several threads.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::measure::{MeasureStencil, SignedMatrixMeasure};
use super::segment::{Grid, SegmentView};
use crate::error::{FsdeError, Result};
use crate::linalg;

pub type PointFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;
pub type SegmentFn = Arc<dyn Fn(SegmentView<'_>, &mut [f64]) + Send + Sync>;

/// Z: ℝ^d → ℝ^d, the non-delayed part of the drift.
#[derive(Clone)]
pub enum PointDrift {
    Zero,
    /// Z(x) = A x.
    Linear(DMatrix<f64>),
    /// Z(x) = −a x − c|x|² x with c ≥ 0.
    LinearCubic { a: f64, c: f64 },
    /// User function writing Z(x) into the output slice; `k1` is the
    /// declared one-sided rate, if known.
    Custom { f: PointFn, k1: Option<f64> },
}

impl fmt::Debug for PointDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::Linear(a) => f.debug_tuple("Linear").field(a).finish(),
            Self::LinearCubic { a, c } => {
                f.debug_struct("LinearCubic").field("a", a).field("c", c).finish()
            }
            Self::Custom { k1, .. } => f.debug_struct("Custom").field("k1", k1).finish(),
        }
    }
}

impl PointDrift {
    /// Writes Z(x) into `out`.
    #[inline]
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Self::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Self::Linear(a) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                linalg::mat_vec_acc(a, x, out);
            }
            Self::LinearCubic { a, c } => {
                let r2 = linalg::norm_sq(x);
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = -(a + c * r2) * xi;
                }
            }
            Self::Custom { f, .. } => f(x, out),
        }
    }

    /// Largest k₁ with ⟨Z(x)−Z(y), x−y⟩ ≤ −k₁|x−y|², when known.
    pub fn one_sided_rate(&self) -> Option<f64> {
        match self {
            Self::Zero => Some(0.0),
            Self::Linear(a) => Some(-linalg::max_sym_eigenvalue(a)),
            Self::LinearCubic { a, c } => (*c >= 0.0).then_some(*a),
            Self::Custom { k1, .. } => *k1,
        }
    }

    /// The matrix A when Z(x) = Ax.
    pub fn linear_matrix(&self, d: usize) -> Option<DMatrix<f64>> {
        match self {
            Self::Zero => Some(DMatrix::zeros(d, d)),
            Self::Linear(a) => Some(a.clone()),
            Self::LinearCubic { a, c } if *c == 0.0 => Some(DMatrix::identity(d, d) * -*a),
            _ => None,
        }
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if let Self::Linear(a) = self {
            if a.nrows() != d || a.ncols() != d {
                return Err(FsdeError::DimensionMismatch {
                    expected: d,
                    got: a.nrows(),
                });
            }
        }
        Ok(())
    }
}

/// b: 𝒞 → ℝ^d, the delayed part of the drift.
#[derive(Clone)]
pub enum DelayDrift {
    Zero,
    /// b(ξ) = B ξ(−r0).
    DiscreteDelay(DMatrix<f64>),
    /// b(ξ) = ∫ν(dθ)ξ(θ); covers distributed delays ∫ρ(θ)ξ(θ)dθ.
    Distributed(SignedMatrixMeasure),
    /// b(ξ)_i = c_i tanh(ξ_i(−r0)).
    TanhDelay(Vec<f64>),
    Sum(Vec<DelayDrift>),
    /// User functional writing b(ξ) into the output slice (overwrite);
    /// `k2` is the declared Lipschitz constant, if known.
    Custom { f: SegmentFn, k2: Option<f64> },
}

impl fmt::Debug for DelayDrift {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "Zero"),
            Self::DiscreteDelay(b) => f.debug_tuple("DiscreteDelay").field(b).finish(),
            Self::Distributed(nu) => f.debug_tuple("Distributed").field(nu).finish(),
            Self::TanhDelay(c) => f.debug_tuple("TanhDelay").field(c).finish(),
            Self::Sum(parts) => f.debug_tuple("Sum").field(parts).finish(),
            Self::Custom { k2, .. } => f.debug_struct("Custom").field("k2", k2).finish(),
        }
    }
}

impl DelayDrift {
    /// Lipschitz constant with respect to the sup norm, when known.
    pub fn lipschitz(&self) -> Option<f64> {
        match self {
            Self::Zero => Some(0.0),
            Self::DiscreteDelay(b) => Some(linalg::op_norm(b)),
            Self::Distributed(nu) => {
                // |∫ν ξ| ≤ |M·1| with M the entrywise total variation.
                let m = nu.total_variation_matrix();
                Some(m.row_iter().map(|r| r.sum().powi(2)).sum::<f64>().sqrt())
            }
            Self::TanhDelay(c) => Some(c.iter().fold(0.0, |a, x| a.max(x.abs()))),
            Self::Sum(parts) => parts.iter().map(Self::lipschitz).sum(),
            Self::Custom { k2, .. } => *k2,
        }
    }

    /// The linear measure when b is linear in the segment.
    pub fn as_measure(&self, r0: f64, d: usize) -> Option<SignedMatrixMeasure> {
        match self {
            Self::Zero => SignedMatrixMeasure::zero(r0, d).ok(),
            Self::DiscreteDelay(b) => SignedMatrixMeasure::dirac(r0, -r0, b.clone()).ok(),
            Self::Distributed(nu) => Some(nu.clone()),
            Self::Sum(parts) => {
                let mut atoms = Vec::new();
                let mut density: Option<super::measure::PiecewiseDensity> = None;
                for p in parts {
                    let m = p.as_measure(r0, d)?;
                    atoms.extend(m.atoms().iter().cloned());
                    if let Some(dn) = m.density() {
                        if density.is_some() {
                            return None;
                        }
                        density = Some(dn.clone());
                    }
                }
                SignedMatrixMeasure::new(r0, d, atoms, density).ok()
            }
            Self::TanhDelay(_) | Self::Custom { .. } => None,
        }
    }

    fn check_dim(&self, d: usize, r0: f64) -> Result<()> {
        match self {
            Self::DiscreteDelay(b) if b.nrows() != d || b.ncols() != d => {
                Err(FsdeError::DimensionMismatch {
                    expected: d,
                    got: b.nrows(),
                })
            }
            Self::Distributed(nu) => {
                if nu.dim() != d {
                    return Err(FsdeError::DimensionMismatch {
                        expected: d,
                        got: nu.dim(),
                    });
                }
                if (nu.r0() - r0).abs() > 1e-12 * r0 {
                    return Err(FsdeError::DelayMismatch {
                        left: r0,
                        right: nu.r0(),
                    });
                }
                Ok(())
            }
            Self::TanhDelay(c) if c.len() != d => Err(FsdeError::DimensionMismatch {
                expected: d,
                got: c.len(),
            }),
            Self::Sum(parts) => parts.iter().try_for_each(|p| p.check_dim(d, r0)),
            _ => Ok(()),
        }
    }

    /// Precomputes grid weights for repeated evaluation on `grid`.
    pub fn compile(&self, grid: Grid, d: usize) -> Result<CompiledDelay> {
        let mut kernels = Vec::new();
        self.push_kernels(grid, d, &mut kernels)?;
        Ok(CompiledDelay { kernels })
    }

    fn push_kernels(&self, grid: Grid, d: usize, out: &mut Vec<Kernel>) -> Result<()> {
        match self {
            Self::Zero => {}
            Self::DiscreteDelay(b) => {
                let nu = SignedMatrixMeasure::dirac(grid.r0, -grid.r0, b.clone())?;
                out.push(Kernel::Stencil(nu.stencil(grid)?));
            }
            Self::Distributed(nu) => out.push(Kernel::Stencil(nu.stencil(grid)?)),
            Self::TanhDelay(c) => out.push(Kernel::Tanh(c.clone())),
            Self::Sum(parts) => {
                for p in parts {
                    p.push_kernels(grid, d, out)?;
                }
            }
            Self::Custom { f, .. } => out.push(Kernel::Custom(f.clone())),
        }
        Ok(())
    }
}

#[derive(Clone)]
enum Kernel {
    Stencil(MeasureStencil),
    Tanh(Vec<f64>),
    Custom(SegmentFn),
}

/// A delay drift with stencils fixed to one grid.
#[derive(Clone)]
pub struct CompiledDelay {
    kernels: Vec<Kernel>,
}

impl CompiledDelay {
    pub fn from_stencil(st: MeasureStencil) -> Self {
        Self {
            kernels: vec![Kernel::Stencil(st)],
        }
    }

    pub fn extend(&mut self, other: CompiledDelay) {
        self.kernels.extend(other.kernels);
    }

    pub fn is_zero(&self) -> bool {
        self.kernels.iter().all(|k| match k {
            Kernel::Stencil(s) => s.is_empty(),
            Kernel::Tanh(c) => c.iter().all(|&x| x == 0.0),
            Kernel::Custom(..) => false,
        })
    }

    /// out += b(ξ).
    #[inline]
    pub fn eval_add(&self, seg: SegmentView<'_>, out: &mut [f64]) {
        for k in &self.kernels {
            match k {
                Kernel::Stencil(st) => st.apply(seg, out),
                Kernel::Tanh(c) => {
                    let x = seg.oldest();
                    for i in 0..out.len() {
                        out[i] += c[i] * x[i].tanh();
                    }
                }
                Kernel::Custom(f) => {
                    let mut tmp = vec![0.0; out.len()];
                    f(seg, &mut tmp);
                    for (o, t) in out.iter_mut().zip(tmp) {
                        *o += t;
                    }
                }
            }
        }
    }
}

pub(crate) fn check_dims(z: &PointDrift, b: &DelayDrift, d: usize, r0: f64) -> Result<()> {
    z.check_dim(d)?;
    b.check_dim(d, r0)
}
