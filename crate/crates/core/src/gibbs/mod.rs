//! Data-augmented Gibbs sampler with Metropolis–Hastings steps for the two
//! variances that enter only through Σ.

mod chain;
mod config;
mod state;
mod updates;

pub use chain::{run_chain, run_chain_from, run_chains, VARIANCE_FLOOR};
pub use config::{CarDf, ChainConfig, PriorConfig, UpdateMask};
pub use state::ParameterState;
pub use updates::{
    beta_conditional, eta_plus_conditional, log_scaled_inv_chi2_prior, mh_scaled_chi2_step,
    u_plus_coordinate_conditional, update_beta, update_eta_plus, update_sigma2_alpha_eps_mh,
    update_sigma2_eta, update_sigma2_u, update_sigma2_v, update_u_plus, update_v,
    v_coordinate_conditional, MhOutcome, ResidualSums, CHI2_1_MEDIAN,
};
