use thiserror::Error;

/// Errors raised by model construction, simulation and spectral routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsdeError {
    #[error("singular sigma: smallest singular value {0:e}")]
    SingularSigma(f64),

    #[error("atom outside support: theta = {theta} not in [-{r0}, 0]")]
    AtomOutsideSupport { theta: f64, r0: f64 },

    #[error("grid misaligned: {what} = {value} is not an integer multiple of h = {h}")]
    GridMisaligned { what: &'static str, value: f64, h: f64 },

    #[error("delay-length mismatch: {left} vs {right}")]
    DelayMismatch { left: f64, right: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid parameter {name} = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("non-finite state at t = {t}: drift blow-up at step size {h}")]
    NonFinite { t: f64, h: f64 },

    #[error("fundamental solution exceeded overflow guard at t = {t}")]
    GammaBlowUp { t: f64 },

    #[error("gamma table horizon {have} shorter than required {need}")]
    HorizonTooShort { have: f64, need: f64 },

    #[error("lambda = {lambda} must exceed the spectral abscissa {lambda0}")]
    BelowAbscissa { lambda: f64, lambda0: f64 },

    #[error("root search failed: {0}")]
    RootSearch(String),

    #[error("model is missing {0}")]
    MissingCertificate(&'static str),
}

pub type Result<T> = std::result::Result<T, FsdeError>;
