//! FSDE models dX = {Z(X(t)) + b(X_t)}dt + σ dB(t), delay measures,
//! segments and coefficient certificates.

pub mod drift;
pub mod measure;
pub mod probe;
pub mod segment;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use drift::{CompiledDelay, DelayDrift, PointDrift};
pub use measure::{Atom, MeasureStencil, PiecewiseDensity, SignedMatrixMeasure};
pub use probe::{probe_dissipativity, ProbeConfig, ProbeReport};
pub use segment::{Grid, Segment, SegmentView};

use crate::error::{FsdeError, Result};
use crate::linalg;

/// Constants (λ₁, λ₂) of the one-sided condition
/// 2⟨Z(ξ(0))+b(ξ)−Z(η(0))−b(η), ξ(0)−η(0)⟩ ≤ λ₂‖ξ−η‖∞² − λ₁|ξ(0)−η(0)|².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DissipativityCert {
    pub lambda1: f64,
    pub lambda2: f64,
}

impl DissipativityCert {
    pub fn new(lambda1: f64, lambda2: f64) -> Result<Self> {
        for (name, v) in [("lambda1", lambda1), ("lambda2", lambda2)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(FsdeError::InvalidParameter {
                    name,
                    value: v,
                    constraint: "must be finite and non-negative",
                });
            }
        }
        Ok(Self { lambda1, lambda2 })
    }

    /// From ⟨Z(x)−Z(y),x−y⟩ ≤ −k₁|x−y|² and |b(ξ)−b(η)| ≤ k₂‖ξ−η‖∞ via
    /// 2k₂ab ≤ s a² + (k₂²/s) b²: (λ₁, λ₂) = (2k₁ − s, k₂²/s).
    pub fn from_lipschitz(lip: LipschitzCert, s: f64) -> Result<Self> {
        if lip.k2 == 0.0 {
            return Self::new(2.0 * lip.k1, 0.0);
        }
        Self::new(2.0 * lip.k1 - s, lip.k2 * lip.k2 / s)
    }

    pub fn rate(&self, r0: f64) -> f64 {
        crate::certify::rate_thm11(self.lambda1, self.lambda2, r0).lambda
    }

    pub fn is_rate_positive(&self, r0: f64) -> bool {
        self.rate(r0) > 0.0
    }
}

/// k₁ (one-sided rate of Z) and k₂ (Lipschitz constant of b).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzCert {
    pub k1: f64,
    pub k2: f64,
}

impl LipschitzCert {
    pub fn new(k1: f64, k2: f64) -> Result<Self> {
        if !k1.is_finite() {
            return Err(FsdeError::InvalidParameter {
                name: "k1",
                value: k1,
                constraint: "must be finite",
            });
        }
        if !(k2 >= 0.0) || !k2.is_finite() {
            return Err(FsdeError::InvalidParameter {
                name: "k2",
                value: k2,
                constraint: "must be finite and non-negative",
            });
        }
        Ok(Self { k1, k2 })
    }
}

/// Drift and noise of a model, with delay stencils fixed to one grid.
#[derive(Clone)]
pub struct Dynamics {
    pub d: usize,
    pub grid: Grid,
    z: PointDrift,
    b: CompiledDelay,
    sigma: DMatrix<f64>,
    sigma_inv: Option<DMatrix<f64>>,
}

impl Dynamics {
    /// Writes Z(x).
    #[inline]
    pub fn z(&self, x: &[f64], out: &mut [f64]) {
        self.z.eval(x, out)
    }

    /// out += b(ξ).
    #[inline]
    pub fn b_add(&self, seg: SegmentView<'_>, out: &mut [f64]) {
        self.b.eval_add(seg, out)
    }

    /// Writes Z(ξ(0)) + b(ξ).
    #[inline]
    pub fn drift(&self, seg: SegmentView<'_>, out: &mut [f64]) {
        self.z(seg.endpoint(), out);
        self.b_add(seg, out);
    }

    /// out += σ v.
    #[inline]
    pub fn sigma_add(&self, v: &[f64], out: &mut [f64]) {
        linalg::mat_vec_acc(&self.sigma, v, out)
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> Result<&DMatrix<f64>> {
        self.sigma_inv
            .as_ref()
            .ok_or_else(|| FsdeError::SingularSigma(linalg::smallest_singular_value(&self.sigma)))
    }

    pub fn has_delay_drift(&self) -> bool {
        !self.b.is_zero()
    }
}

/// Common interface of the two model kinds, used by the simulators.
pub trait Model: Send + Sync {
    fn dim(&self) -> usize;
    fn r0(&self) -> f64;
    fn sigma(&self) -> &DMatrix<f64>;
    fn dynamics(&self, h: f64) -> Result<Dynamics>;
    fn validate(&self) -> Result<ValidationReport>;
}

fn invert_sigma(sigma: &DMatrix<f64>) -> (Option<DMatrix<f64>>, f64) {
    let smin = linalg::smallest_singular_value(sigma);
    let scale = linalg::op_norm(sigma).max(1.0);
    if smin <= 1e-12 * scale {
        return (None, smin);
    }
    (sigma.clone().try_inverse(), smin)
}

/// Outcome of structural validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub dim: usize,
    pub r0: f64,
    pub sigma_min_singular_value: f64,
    pub sigma_inv_norm: f64,
    pub measure_norm: Option<f64>,
}

/// dX = {Z(X(t)) + b(X_t)}dt + σ dB(t).
#[derive(Clone, Debug)]
pub struct FsdeModel {
    d: usize,
    r0: f64,
    z: PointDrift,
    b: DelayDrift,
    sigma: DMatrix<f64>,
    sigma_inv: Option<DMatrix<f64>>,
    sigma_inv_norm: f64,
    sigma_min: f64,
    dissipativity: Option<DissipativityCert>,
    lipschitz: Option<LipschitzCert>,
}

impl FsdeModel {
    /// Builds a model; a singular σ is accepted here (deterministic runs
    /// use σ = 0) and rejected by `validate`.
    pub fn new(r0: f64, z: PointDrift, b: DelayDrift, sigma: DMatrix<f64>) -> Result<Self> {
        if !(r0 > 0.0) || !r0.is_finite() {
            return Err(FsdeError::InvalidParameter {
                name: "r0",
                value: r0,
                constraint: "must be positive",
            });
        }
        let d = sigma.nrows();
        if sigma.ncols() != d || d == 0 {
            return Err(FsdeError::DimensionMismatch {
                expected: d,
                got: sigma.ncols(),
            });
        }
        drift::check_dims(&z, &b, d, r0)?;
        let (sigma_inv, sigma_min) = invert_sigma(&sigma);
        let sigma_inv_norm = sigma_inv.as_ref().map_or(f64::INFINITY, linalg::op_norm);
        Ok(Self {
            d,
            r0,
            z,
            b,
            sigma,
            sigma_inv,
            sigma_inv_norm,
            sigma_min,
            dissipativity: None,
            lipschitz: None,
        })
    }

    pub fn with_dissipativity(mut self, cert: DissipativityCert) -> Self {
        self.dissipativity = Some(cert);
        self
    }

    pub fn with_lipschitz(mut self, cert: LipschitzCert) -> Self {
        self.lipschitz = Some(cert);
        self
    }

    pub fn z(&self) -> &PointDrift {
        &self.z
    }

    pub fn b(&self) -> &DelayDrift {
        &self.b
    }

    pub fn sigma_inv_norm(&self) -> f64 {
        self.sigma_inv_norm
    }

    /// Declared certificate, else the one implied by the drift families.
    pub fn lipschitz(&self) -> Option<LipschitzCert> {
        self.lipschitz.or_else(|| self.derived_lipschitz())
    }

    pub fn derived_lipschitz(&self) -> Option<LipschitzCert> {
        Some(LipschitzCert {
            k1: self.z.one_sided_rate()?,
            k2: self.b.lipschitz()?,
        })
    }

    pub fn declared_dissipativity(&self) -> Option<DissipativityCert> {
        self.dissipativity
    }

    /// Declared (λ₁, λ₂), else the family-derived pair with the split
    /// parameter that maximises the rate.
    pub fn dissipativity(&self) -> Option<DissipativityCert> {
        if self.dissipativity.is_some() {
            return self.dissipativity;
        }
        let lip = self.lipschitz()?;
        if lip.k1 < 0.0 {
            return None;
        }
        if lip.k2 == 0.0 {
            return DissipativityCert::new(2.0 * lip.k1, 0.0).ok();
        }
        let cor = crate::certify::check_cor12(lip.k1, lip.k2, self.r0);
        let s = if cor.s0 > 0.0 && cor.s0 < 2.0 * lip.k1 {
            cor.s0
        } else {
            lip.k1
        };
        DissipativityCert::from_lipschitz(lip, s).ok()
    }

    /// ν = Aδ₀ + (measure of b) when both parts are linear.
    pub fn linear_measure(&self) -> Option<SignedMatrixMeasure> {
        let a = self.z.linear_matrix(self.d)?;
        let rest = self.b.as_measure(self.r0, self.d)?;
        let mut atoms = vec![Atom {
            theta: 0.0,
            matrix: a,
        }];
        atoms.extend(rest.atoms().iter().cloned());
        SignedMatrixMeasure::new(self.r0, self.d, atoms, rest.density().cloned()).ok()
    }
}

impl Model for FsdeModel {
    fn dim(&self) -> usize {
        self.d
    }

    fn r0(&self) -> f64 {
        self.r0
    }

    fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    fn dynamics(&self, h: f64) -> Result<Dynamics> {
        let grid = Grid::new(self.r0, h)?;
        Ok(Dynamics {
            d: self.d,
            grid,
            z: self.z.clone(),
            b: self.b.compile(grid, self.d)?,
            sigma: self.sigma.clone(),
            sigma_inv: self.sigma_inv.clone(),
        })
    }

    fn validate(&self) -> Result<ValidationReport> {
        if self.sigma_inv.is_none() {
            return Err(FsdeError::SingularSigma(self.sigma_min));
        }
        Ok(ValidationReport {
            dim: self.d,
            r0: self.r0,
            sigma_min_singular_value: self.sigma_min,
            sigma_inv_norm: self.sigma_inv_norm,
            measure_norm: self.linear_measure().map(|nu| nu.norm()),
        })
    }
}

/// dX = {∫ν(dθ)X(t+θ) + b(X_t)}dt + σ dB(t).
#[derive(Clone, Debug)]
pub struct SemiLinearModel {
    nu: SignedMatrixMeasure,
    b: DelayDrift,
    k2: f64,
    sigma: DMatrix<f64>,
    sigma_inv: Option<DMatrix<f64>>,
    sigma_min: f64,
}

impl SemiLinearModel {
    /// `k2` defaults to the family Lipschitz constant of `b` when `None`.
    pub fn new(
        nu: SignedMatrixMeasure,
        b: DelayDrift,
        sigma: DMatrix<f64>,
        k2: Option<f64>,
    ) -> Result<Self> {
        let d = nu.dim();
        if sigma.nrows() != d || sigma.ncols() != d {
            return Err(FsdeError::DimensionMismatch {
                expected: d,
                got: sigma.nrows(),
            });
        }
        drift::check_dims(&PointDrift::Zero, &b, d, nu.r0())?;
        let k2 = match k2.or_else(|| b.lipschitz()) {
            Some(k) if k >= 0.0 && k.is_finite() => k,
            Some(k) => {
                return Err(FsdeError::InvalidParameter {
                    name: "k2",
                    value: k,
                    constraint: "must be finite and non-negative",
                })
            }
            None => return Err(FsdeError::MissingCertificate("k2 for a custom delay drift")),
        };
        let (sigma_inv, sigma_min) = invert_sigma(&sigma);
        Ok(Self {
            nu,
            b,
            k2,
            sigma,
            sigma_inv,
            sigma_min,
        })
    }

    pub fn nu(&self) -> &SignedMatrixMeasure {
        &self.nu
    }

    pub fn b(&self) -> &DelayDrift {
        &self.b
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    /// The same equation written as Z + b: the atom of ν at 0 becomes a
    /// linear Z, everything else moves into b.
    pub fn to_fsde(&self) -> Result<FsdeModel> {
        let d = self.nu.dim();
        let mut a0 = DMatrix::zeros(d, d);
        let mut rest = Vec::new();
        for atom in self.nu.atoms() {
            if atom.theta == 0.0 {
                a0 += &atom.matrix;
            } else {
                rest.push(atom.clone());
            }
        }
        let delayed =
            SignedMatrixMeasure::new(self.nu.r0(), d, rest, self.nu.density().cloned())?;
        let mut parts = vec![DelayDrift::Distributed(delayed)];
        if !matches!(self.b, DelayDrift::Zero) {
            parts.push(self.b.clone());
        }
        FsdeModel::new(
            self.nu.r0(),
            PointDrift::Linear(a0),
            DelayDrift::Sum(parts),
            self.sigma.clone(),
        )
    }
}

impl Model for SemiLinearModel {
    fn dim(&self) -> usize {
        self.nu.dim()
    }

    fn r0(&self) -> f64 {
        self.nu.r0()
    }

    fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    fn dynamics(&self, h: f64) -> Result<Dynamics> {
        let grid = Grid::new(self.r0(), h)?;
        let mut b = CompiledDelay::from_stencil(self.nu.stencil(grid)?);
        b.extend(self.b.compile(grid, self.dim())?);
        Ok(Dynamics {
            d: self.dim(),
            grid,
            z: PointDrift::Zero,
            b,
            sigma: self.sigma.clone(),
            sigma_inv: self.sigma_inv.clone(),
        })
    }

    fn validate(&self) -> Result<ValidationReport> {
        let Some(inv) = &self.sigma_inv else {
            return Err(FsdeError::SingularSigma(self.sigma_min));
        };
        Ok(ValidationReport {
            dim: self.dim(),
            r0: self.r0(),
            sigma_min_singular_value: self.sigma_min,
            sigma_inv_norm: linalg::op_norm(inv),
            measure_norm: Some(self.nu.norm()),
        })
    }
}

/// Structural check of a model, optionally against a step size.
pub fn validate_model(m: &dyn Model, h: Option<f64>) -> Result<ValidationReport> {
    let report = m.validate()?;
    if let Some(h) = h {
        Grid::new(m.r0(), h)?;
    }
    Ok(report)
}
