//! Bayesian spatial stochastic-frontier panel model for estimating hidden
//! populations from observed counts.
//!
//! The observed log count is modelled as
//!
//! ```text
//! y_it = x_it'β + α_i + v_i − η_i⁺ − u_it⁺ + ε_it
//! ```
//!
//! where `α_i` is a random region effect (integrated out analytically), `v_i`
//! an intrinsic CAR spatial effect, `η_i⁺` and `u_it⁺` half-normal permanent
//! and transient under-capture terms, and `ε_it` idiosyncratic noise. The
//! hidden population is `P_it = Y_it · exp(η_i⁺ + u_it⁺)`.

pub mod analysis;
pub mod draws;
pub mod error;
pub mod gibbs;
pub mod kernels;
pub mod panel;
pub mod report;
pub mod rng;
pub mod simulation;
pub mod sir;
pub mod spatial;

pub use draws::{ChainStats, DrawsMeta, PosteriorDraws};
pub use error::{Error, Result};
pub use gibbs::{
    run_chain, run_chains, CarDf, ChainConfig, ParameterState, PriorConfig, UpdateMask,
};
pub use panel::PanelDataset;
pub use rng::RandomStream;
pub use simulation::{simulate, DgpConfig, EpsLaw, LatentTruth, SimulatedTruth};
pub use spatial::SpatialGraph;
