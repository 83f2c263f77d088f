//! Functional SDEs with memory: models, certified convergence rates,
//! spectral analysis of the linear part, simulation and Monte-Carlo checks.

pub mod certify;
pub mod error;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod simulate;
pub mod spectral;
pub mod verify;

pub use error::{FsdeError, Result};
