//! Characteristic matrix, spectral abscissa and fundamental solution of the
//! linear delay equation dΓ = (∫ν(dθ)Γ(t+θ))dt.

mod charmat;
mod fourier;
mod gamma;
mod pp;
mod roots;

pub use charmat::{char_det, char_inverse, char_matrix, char_matrix_derivative, laplace_measure};
pub use fourier::{gamma_fourier, FourierConfig, FourierGamma};
pub use gamma::{gamma_solve, CkEstimate, GammaTable};
pub use pp::{pp_bound, PpBoundResult, PP_GRID};
pub use roots::{lambda0, BoxCount, CharRootResult, RootSearchConfig};
