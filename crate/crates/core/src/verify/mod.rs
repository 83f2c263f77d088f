//! Monte Carlo checks of the certified inequalities.

pub mod functional;
pub mod invariant;
pub mod moments;
pub mod pathwise;
pub mod report;
pub mod stats;

use serde::{Deserialize, Serialize};

pub use functional::TestFunctional;
pub use invariant::{
    check_hyperbound, check_l2_decay, check_marginal_ks, check_shift_invariance, linear_endpoint_oracle,
    sample_invariant, transient_ensemble, InvariantEnsemble, Oracle,
};
pub use moments::{check_exp_moment, check_girsanov_moments, check_harnack, tv_bound_estimate};
pub use pathwise::{
    check_contraction, check_memory_passthrough, check_restart_coupling, discretisation_slack, window_max,
    Witness,
};
pub use report::{CheckReport, Curve, Status};
pub use stats::{
    ks_one_sample, ks_two_sample, mann_kendall, mean_var, normal_cdf, weighted_fit, KsResult, LinearFit, MannKendall,
    McEstimate,
};

/// Replica count, step size and base seed for a Monte Carlo check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n: usize,
    pub h: f64,
    pub seed: u64,
}
