//! TOML run configuration.
//!
//! ```toml
//! [model]
//! r0 = 1.0
//! dim = 1
//! sigma = [1.0]                          # row-major d×d
//! z = { kind = "linear", a = [-1.0] }    # zero | linear | linear_cubic
//! b = { kind = "tanh_delay", c = [0.1] } # zero | discrete_delay | tanh_delay | distributed | sum
//!
//! [measure]                              # optional linear part ∫ν(dθ)X(t+θ); z must then be zero
//! atoms = [{ theta = 0.0, matrix = [-1.0] }]
//!
//! [certificates]                         # optional declared constants
//! lambda1 = 2.0
//! lambda2 = 0.0
//!
//! [sim]
//! seed = 42
//! horizon = 10.0
//! xi = { kind = "constant", value = [1.0] }
//! eta = { kind = "constant", value = [-1.0] }
//! ```

use std::path::Path;

use fsde_core::model::{
    Atom, DelayDrift, DissipativityCert, FsdeModel, Grid, LipschitzCert, PiecewiseDensity, PointDrift, Segment,
    SemiLinearModel, SignedMatrixMeasure,
};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub model: ModelSection,
    #[serde(default)]
    pub measure: Option<MeasureSpec>,
    #[serde(default)]
    pub certificates: CertSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub spectral: SpectralSection,
    #[serde(default)]
    pub verify: VerifySection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub r0: f64,
    #[serde(default = "one")]
    pub dim: usize,
    pub sigma: Vec<f64>,
    #[serde(default)]
    pub z: PointSpec,
    #[serde(default)]
    pub b: DelaySpec,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PointSpec {
    #[default]
    Zero,
    Linear {
        a: Vec<f64>,
    },
    /// −a·x − c·|x|²x
    LinearCubic {
        a: f64,
        c: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelaySpec {
    #[default]
    Zero,
    DiscreteDelay {
        matrix: Vec<f64>,
    },
    TanhDelay {
        c: Vec<f64>,
    },
    Distributed {
        #[serde(default)]
        atoms: Vec<AtomSpec>,
        #[serde(default)]
        density: Option<Vec<Vec<f64>>>,
    },
    Sum {
        parts: Vec<DelaySpec>,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    #[serde(default)]
    pub atoms: Vec<AtomSpec>,
    /// Piecewise-constant density: equal cells over [−r0, 0], each a row-major d×d matrix.
    #[serde(default)]
    pub density: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub theta: f64,
    pub matrix: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertSection {
    pub lambda1: Option<f64>,
    pub lambda2: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default)]
    pub seed: u64,
    /// Overrides the budget's step size.
    #[serde(default)]
    pub h: Option<f64>,
    /// Overrides the budget's replica count.
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default = "ten")]
    pub horizon: f64,
    #[serde(default)]
    pub xi: SegmentSpec,
    #[serde(default = "default_eta")]
    pub eta: SegmentSpec,
}

fn ten() -> f64 {
    10.0
}

fn default_eta() -> SegmentSpec {
    SegmentSpec::Constant { value: vec![-1.0] }
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            seed: 0,
            h: None,
            n: None,
            horizon: 10.0,
            xi: SegmentSpec::default(),
            eta: default_eta(),
        }
    }
}

/// Initial segment θ ↦ ξ(θ) on [−r0, 0].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SegmentSpec {
    /// A scalar value is broadcast to every component.
    Constant { value: Vec<f64> },
    /// value + slope·θ
    Affine { value: Vec<f64>, slope: Vec<f64> },
    /// value + amplitude·sin(freq·θ)
    Sine {
        value: Vec<f64>,
        amplitude: Vec<f64>,
        freq: f64,
    },
}

impl Default for SegmentSpec {
    fn default() -> Self {
        Self::Constant { value: vec![1.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralSection {
    /// Tabulation horizon for Γ, in units of r0.
    #[serde(default = "spectral_horizon")]
    pub horizon: f64,
    /// λ for the explicit bound; defaults to λ₀/2.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default = "root_tol")]
    pub tol: f64,
    #[serde(default)]
    pub r_max: Option<f64>,
    #[serde(default = "pp_grid")]
    pub pp_grid: usize,
}

fn spectral_horizon() -> f64 {
    10.0
}

fn root_tol() -> f64 {
    1e-10
}

fn pp_grid() -> usize {
    fsde_core::spectral::PP_GRID
}

impl Default for SpectralSection {
    fn default() -> Self {
        Self {
            horizon: spectral_horizon(),
            lambda: None,
            tol: root_tol(),
            r_max: None,
            pp_grid: pp_grid(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Empty selects every check the model supports.
    #[serde(default)]
    pub checks: Vec<String>,
    /// Pre-horizon of the coupling in Harnack, Girsanov and TV checks.
    #[serde(default = "unit")]
    pub t: f64,
    #[serde(default = "powers")]
    pub p: Vec<f64>,
    #[serde(default = "contraction_horizon")]
    pub contraction_horizon: f64,
    #[serde(default = "eps_grid")]
    pub eps: Vec<f64>,
    #[serde(default = "moment_times")]
    pub moment_times: Vec<f64>,
    #[serde(default = "burn_in")]
    pub burn_in: f64,
    #[serde(default = "spacing")]
    pub spacing: f64,
    #[serde(default = "decay_times")]
    pub decay_times: Vec<f64>,
    #[serde(default = "unit")]
    pub hyper_t: f64,
    /// Target rate for the L² check; defaults to the certified rate.
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default = "restart")]
    pub restart: [f64; 2],
    #[serde(default = "tv_times")]
    pub tv_times: Vec<f64>,
    #[serde(default = "alpha")]
    pub alpha: f64,
}

fn unit() -> f64 {
    1.0
}
fn powers() -> Vec<f64> {
    vec![2.0, 4.0]
}
fn contraction_horizon() -> f64 {
    8.0
}
fn eps_grid() -> Vec<f64> {
    vec![0.05, 0.1, 0.2]
}
fn moment_times() -> Vec<f64> {
    (1..=8).map(f64::from).collect()
}
fn burn_in() -> f64 {
    20.0
}
fn spacing() -> f64 {
    2.0
}
fn decay_times() -> Vec<f64> {
    vec![0.0, 0.25, 0.5, 0.75, 1.0]
}
fn restart() -> [f64; 2] {
    [2.0, 4.0]
}
fn tv_times() -> Vec<f64> {
    vec![2.0, 3.0, 4.0, 5.0]
}
fn alpha() -> f64 {
    0.01
}

impl Default for VerifySection {
    fn default() -> Self {
        toml::from_str("").expect("defaults parse")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<String>,
    /// Write CSV curves next to the JSON report.
    #[serde(default = "yes")]
    pub csv: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputSection {
    fn default() -> Self {
        toml::from_str("").expect("defaults parse")
    }
}

/// Everything built from a config: the model as Z + b, and the linear
/// part ν with the Lipschitz constant of the remainder when known.
pub struct BuiltModel {
    pub fsde: FsdeModel,
    pub nu: Option<SignedMatrixMeasure>,
    pub k2_rest: f64,
    pub semi_linear: Option<SemiLinearModel>,
}

fn matrix(what: &str, d: usize, v: &[f64]) -> Result<DMatrix<f64>, CliError> {
    if v.len() == 1 && d > 1 {
        return Ok(DMatrix::identity(d, d) * v[0]);
    }
    if v.len() != d * d {
        return Err(CliError::Config(format!("{what}: expected {} entries, got {}", d * d, v.len())));
    }
    Ok(DMatrix::from_row_slice(d, d, v))
}

fn vector(what: &str, d: usize, v: &[f64]) -> Result<Vec<f64>, CliError> {
    match v.len() {
        1 => Ok(vec![v[0]; d]),
        n if n == d => Ok(v.to_vec()),
        n => Err(CliError::Config(format!("{what}: expected {d} entries, got {n}"))),
    }
}

fn measure(r0: f64, d: usize, atoms: &[AtomSpec], density: &Option<Vec<Vec<f64>>>) -> Result<SignedMatrixMeasure, CliError> {
    let atoms = atoms
        .iter()
        .map(|a| {
            Ok(Atom {
                theta: a.theta,
                matrix: matrix("measure atom", d, &a.matrix)?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let density = density
        .as_ref()
        .map(|cells| {
            Ok::<_, CliError>(PiecewiseDensity {
                cells: cells
                    .iter()
                    .map(|c| matrix("density cell", d, c))
                    .collect::<Result<_, _>>()?,
            })
        })
        .transpose()?;
    Ok(SignedMatrixMeasure::new(r0, d, atoms, density)?)
}

fn delay(spec: &DelaySpec, r0: f64, d: usize) -> Result<DelayDrift, CliError> {
    Ok(match spec {
        DelaySpec::Zero => DelayDrift::Zero,
        DelaySpec::DiscreteDelay { matrix: m } => DelayDrift::DiscreteDelay(matrix("b.matrix", d, m)?),
        DelaySpec::TanhDelay { c } => DelayDrift::TanhDelay(vector("b.c", d, c)?),
        DelaySpec::Distributed { atoms, density } => DelayDrift::Distributed(measure(r0, d, atoms, density)?),
        DelaySpec::Sum { parts } => {
            DelayDrift::Sum(parts.iter().map(|p| delay(p, r0, d)).collect::<Result<_, _>>()?)
        }
    })
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, Vec<u8>), CliError> {
        let bytes = std::fs::read(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Ok((Self::from_toml(text)?, bytes))
    }

    pub fn build_model(&self) -> Result<BuiltModel, CliError> {
        let m = &self.model;
        let d = m.dim;
        if d == 0 {
            return Err(CliError::Config("model.dim must be positive".into()));
        }
        let sigma = matrix("model.sigma", d, &m.sigma)?;
        let b = delay(&m.b, m.r0, d)?;
        let (mut fsde, nu, k2_rest, semi_linear) = match &self.measure {
            Some(ms) => {
                if m.z != PointSpec::Zero {
                    return Err(CliError::Config("model.z must be zero when [measure] gives the linear part".into()));
                }
                let nu = measure(m.r0, d, &ms.atoms, &ms.density)?;
                let sl = SemiLinearModel::new(nu.clone(), b, sigma, self.certificates.k2)?;
                let k2 = sl.k2();
                (sl.to_fsde()?, Some(nu), k2, Some(sl))
            }
            None => {
                let z = match &m.z {
                    PointSpec::Zero => PointDrift::Zero,
                    PointSpec::Linear { a } => PointDrift::Linear(matrix("model.z.a", d, a)?),
                    PointSpec::LinearCubic { a, c } => PointDrift::LinearCubic { a: *a, c: *c },
                };
                let f = FsdeModel::new(m.r0, z, b, sigma)?;
                let nu = f.linear_measure();
                (f, nu, 0.0, None)
            }
        };
        let c = &self.certificates;
        match (c.lambda1, c.lambda2) {
            (Some(l1), Some(l2)) => fsde = fsde.with_dissipativity(DissipativityCert::new(l1, l2)?),
            (None, None) => {}
            _ => return Err(CliError::Config("certificates: give both lambda1 and lambda2".into())),
        }
        match (c.k1, c.k2) {
            (Some(k1), Some(k2)) => fsde = fsde.with_lipschitz(LipschitzCert::new(k1, k2)?),
            (None, None) => {}
            (None, Some(_)) if self.measure.is_some() => {}
            _ => return Err(CliError::Config("certificates: give both k1 and k2".into())),
        }
        Ok(BuiltModel {
            fsde,
            nu,
            k2_rest,
            semi_linear,
        })
    }

    /// Initial segment on the simulation grid.
    pub fn segment(&self, spec: &SegmentSpec, h: f64) -> Result<Segment, CliError> {
        let d = self.model.dim;
        let grid = Grid::new(self.model.r0, h)?;
        let f: Box<dyn Fn(f64) -> Vec<f64>> = match spec {
            SegmentSpec::Constant { value } => {
                let v = vector("segment value", d, value)?;
                Box::new(move |_| v.clone())
            }
            SegmentSpec::Affine { value, slope } => {
                let (v, s) = (vector("segment value", d, value)?, vector("segment slope", d, slope)?);
                Box::new(move |t| v.iter().zip(&s).map(|(a, b)| a + b * t).collect())
            }
            SegmentSpec::Sine { value, amplitude, freq } => {
                let (v, a, w) = (vector("segment value", d, value)?, vector("segment amplitude", d, amplitude)?, *freq);
                Box::new(move |t| v.iter().zip(&a).map(|(c, b)| c + b * (w * t).sin()).collect())
            }
        };
        Ok(Segment::from_fn(grid, d, f)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const OU: &str = r#"
[model]
r0 = 1.0
sigma = [1.0]
z = { kind = "linear", a = [-1.0] }
"#;

    #[test]
    fn minimal_config_builds() {
        let c = RunConfig::from_toml(OU).unwrap();
        let b = c.build_model().unwrap();
        assert_eq!(b.nu.unwrap().origin_only().unwrap()[(0, 0)], -1.0);
        assert_eq!(c.verify.p, vec![2.0, 4.0]);
        assert_eq!(c.sim.seed, 0);
        assert!(c.output.csv);
        assert_eq!(c.output, OutputSection::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = format!("{OU}\n[sim]\nseeed = 3\n");
        assert!(matches!(RunConfig::from_toml(&bad), Err(CliError::Config(_))));
        let bad = OU.replace("sigma", "sigma = [1.0]\nextra");
        assert!(RunConfig::from_toml(&bad).is_err());
    }

    #[test]
    fn measure_requires_zero_point_drift() {
        let bad = format!("{OU}\n[measure]\natoms = [{{ theta = -1.0, matrix = [-0.3] }}]\n");
        let c = RunConfig::from_toml(&bad).unwrap();
        assert!(matches!(c.build_model(), Err(CliError::Config(_))));
    }

    #[test]
    fn segments_broadcast_scalars() {
        let mut c = RunConfig::from_toml(OU).unwrap();
        c.model.dim = 2;
        c.model.sigma = vec![1.0];
        c.model.z = PointSpec::Linear { a: vec![-1.0] };
        let s = c
            .segment(&SegmentSpec::Affine { value: vec![1.0], slope: vec![2.0, 0.0] }, 0.25)
            .unwrap();
        assert_eq!(s.point(0), &[-1.0, 1.0]);
        assert_eq!(s.endpoint(), &[1.0, 1.0]);
    }
}
