use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Hyperparameters of the prior.
///
/// `Q̄_k / σ²_k ~ χ²(N̄_k)` for k ∈ {ε, α, v}; `σ²_u` and `σ²_η` are
/// inverse-gamma with shape `v0/2` and scale `v0 · log²(r*)`, which puts the
/// prior median report rate of each one-sided component near `r*`.
#[derive(Clone, Debug, PartialEq)]
pub struct PriorConfig {
    /// Prior mean of β; empty means the zero vector of the data's width.
    pub beta_mean: Vec<f64>,
    /// `B₀ = beta_cov_scale · I`.
    pub beta_cov_scale: f64,
    pub qbar_eps: f64,
    pub qbar_alpha: f64,
    pub qbar_v: f64,
    pub nbar_eps: f64,
    pub nbar_alpha: f64,
    pub nbar_v: f64,
    pub v0_u: f64,
    pub v0_eta: f64,
    pub r_star_u: f64,
    pub r_star_eta: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            beta_mean: Vec::new(),
            beta_cov_scale: 1000.0,
            qbar_eps: 1e-4,
            qbar_alpha: 1e-4,
            qbar_v: 1e-4,
            nbar_eps: 1.0,
            nbar_alpha: 1.0,
            nbar_v: 1.0,
            v0_u: 10.0,
            v0_eta: 10.0,
            r_star_u: 0.85,
            r_star_eta: 0.70,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self, k: usize) -> Result<()> {
        let positives = [
            ("beta_cov_scale", self.beta_cov_scale),
            ("qbar_eps", self.qbar_eps),
            ("qbar_alpha", self.qbar_alpha),
            ("qbar_v", self.qbar_v),
            ("nbar_eps", self.nbar_eps),
            ("nbar_alpha", self.nbar_alpha),
            ("nbar_v", self.nbar_v),
            ("v0_u", self.v0_u),
            ("v0_eta", self.v0_eta),
        ];
        for (name, v) in positives {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "prior {name} must be positive, got {v}"
                )));
            }
        }
        for (name, r) in [("r_star_u", self.r_star_u), ("r_star_eta", self.r_star_eta)] {
            if !(r > 0.0 && r < 1.0) {
                return Err(Error::invalid(format!(
                    "prior {name} must lie in (0, 1), got {r}"
                )));
            }
        }
        if !self.beta_mean.is_empty() && self.beta_mean.len() != k {
            return Err(Error::invalid(format!(
                "beta_mean has length {}, data has {k} regressors",
                self.beta_mean.len()
            )));
        }
        Ok(())
    }

    pub fn beta_mean_for(&self, k: usize) -> Vec<f64> {
        if self.beta_mean.is_empty() {
            vec![0.0; k]
        } else {
            self.beta_mean.clone()
        }
    }

    /// Inverse-gamma (shape, scale) of the σ²_u prior.
    pub fn sigma2_u_prior(&self) -> (f64, f64) {
        let l = self.r_star_u.ln();
        (self.v0_u / 2.0, 2.0 * self.v0_u * l * l / 2.0)
    }

    /// Inverse-gamma (shape, scale) of the σ²_η prior.
    pub fn sigma2_eta_prior(&self) -> (f64, f64) {
        let l = self.r_star_eta.ln();
        (self.v0_eta / 2.0, 2.0 * self.v0_eta * l * l / 2.0)
    }
}

/// Degrees of freedom used in the σ²_v full conditional.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CarDf {
    /// `N·T + N̄_v`: one CAR factor per period (default).
    PanelCells,
    /// `N + N̄_v`, the count implied by a single CAR factor.
    Regions,
}

impl CarDf {
    pub fn degrees_of_freedom(self, n_regions: usize, n_periods: usize, nbar_v: f64) -> f64 {
        match self {
            CarDf::PanelCells => (n_regions * n_periods) as f64 + nbar_v,
            CarDf::Regions => n_regions as f64 + nbar_v,
        }
    }
}

impl fmt::Display for CarDf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CarDf::PanelCells => "nt",
            CarDf::Regions => "n",
        })
    }
}

impl FromStr for CarDf {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "nt" => Ok(CarDf::PanelCells),
            "n" => Ok(CarDf::Regions),
            other => Err(Error::invalid(format!(
                "car-df must be `nt` or `n`, got `{other}`"
            ))),
        }
    }
}

/// Which blocks a sweep updates. Frozen blocks keep their initial values.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct UpdateMask {
    pub beta: bool,
    pub u_plus: bool,
    pub eta_plus: bool,
    pub v: bool,
    pub sigma2_v: bool,
    pub sigma2_u: bool,
    pub sigma2_eta: bool,
    pub sigma2_alpha: bool,
    pub sigma2_eps: bool,
}

impl UpdateMask {
    pub const ALL: UpdateMask = UpdateMask {
        beta: true,
        u_plus: true,
        eta_plus: true,
        v: true,
        sigma2_v: true,
        sigma2_u: true,
        sigma2_eta: true,
        sigma2_alpha: true,
        sigma2_eps: true,
    };

    pub const NONE: UpdateMask = UpdateMask {
        beta: false,
        u_plus: false,
        eta_plus: false,
        v: false,
        sigma2_v: false,
        sigma2_u: false,
        sigma2_eta: false,
        sigma2_alpha: false,
        sigma2_eps: false,
    };
}

impl Default for UpdateMask {
    fn default() -> Self {
        Self::ALL
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// Exponent applied to the median-centred χ²(1) multiplier of the σ²_α
    /// proposal; 1 is the plain scaled-χ²(1) proposal.
    pub mh_step_scale_alpha: f64,
    pub mh_step_scale_eps: f64,
    /// Re-center v to mean zero after every spatial sweep.
    pub center_car: bool,
    pub car_df: CarDf,
    pub updates: UpdateMask,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            n_iter: 20_000,
            burn_in: 10_000,
            thin: 5,
            seed: 1,
            mh_step_scale_alpha: 1.0,
            mh_step_scale_eps: 1.0,
            center_car: false,
            car_df: CarDf::PanelCells,
            updates: UpdateMask::ALL,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.n_iter {
            return Err(Error::invalid(format!(
                "burn-in ({}) must be smaller than the iteration count ({})",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 {
            return Err(Error::invalid("thin must be at least 1"));
        }
        for (name, s) in [
            ("mh_step_scale_alpha", self.mh_step_scale_alpha),
            ("mh_step_scale_eps", self.mh_step_scale_eps),
        ] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {s}")));
            }
        }
        Ok(())
    }

    /// Number of states kept: `(n_iter − burn_in) / thin`.
    pub fn n_stored(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }
}
