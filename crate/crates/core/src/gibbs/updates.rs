//! Full-conditional updates of one Gibbs sweep.
//!
//! Each function reads the current state and returns the new value of its
//! block; the chain driver writes it back. All `x'Σ⁻¹y` products go through
//! the rank-one form of [`CompoundSymmetricCov`].

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::gibbs::config::{CarDf, PriorConfig};
use crate::gibbs::state::{dot, ParameterState};
use crate::kernels::{
    condition_estimate, sample_chi_squared, sample_inverse_gamma, truncated_normal_above,
    CompoundSymmetricCov,
};
use crate::panel::PanelDataset;
use crate::spatial::SpatialGraph;

/// Median of χ²(1).
pub const CHI2_1_MEDIAN: f64 = 0.454_936_423_119_572_8;

/// `y_i − X_iβ` for every cell, region-major.
fn regression_residuals(state: &ParameterState, data: &PanelDataset) -> Vec<f64> {
    let t = data.n_periods();
    (0..data.n_cells())
        .map(|c| data.y()[c] - dot(data.x_row(c / t, c % t), &state.beta))
        .collect()
}

/// Mean and covariance of the Gaussian full conditional of β.
pub fn beta_conditional(
    state: &ParameterState,
    data: &PanelDataset,
    prior: &PriorConfig,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (n, t, k) = (data.n_regions(), data.n_periods(), data.k_regressors());
    let cov = state.cov(t)?;
    let c = cov.shrink();
    let s2e = cov.sigma2_eps();

    let b0_inv = 1.0 / prior.beta_cov_scale;
    let beta0 = prior.beta_mean_for(k);
    let mut precision = DMatrix::<f64>::identity(k, k) * b0_inv;
    let mut rhs = DVector::<f64>::from_iterator(k, beta0.iter().map(|b| b * b0_inv));

    let mut col_sum = vec![0.0; k];
    for i in 0..n {
        let x_i = data.x_region(i);
        let y_i = data.y_region(i);
        col_sum.iter_mut().for_each(|s| *s = 0.0);
        let mut ytilde_sum = 0.0;
        for s in 0..t {
            let row = &x_i[s * k..(s + 1) * k];
            let yt = y_i[s] + state.u_plus[i * t + s] - state.v[i] + state.eta_plus[i];
            ytilde_sum += yt;
            for a in 0..k {
                col_sum[a] += row[a];
                rhs[a] += row[a] * yt / s2e;
                for b in 0..k {
                    precision[(a, b)] += row[a] * row[b] / s2e;
                }
            }
        }
        for a in 0..k {
            rhs[a] -= c * col_sum[a] * ytilde_sum / s2e;
            for b in 0..k {
                precision[(a, b)] -= c * col_sum[a] * col_sum[b] / s2e;
            }
        }
    }

    let chol = precision
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical {
            message: "posterior precision of beta is not positive definite".into(),
            condition: condition_estimate(&precision),
        })?;
    let mean = chol.solve(&rhs);
    let covariance = chol.inverse();
    Ok((mean, covariance))
}

pub fn update_beta<R: Rng + ?Sized>(
    state: &ParameterState,
    data: &PanelDataset,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (mean, covariance) = beta_conditional(state, data, prior)?;
    let k = mean.len();
    let chol = covariance
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical {
            message: "posterior covariance of beta is not positive definite".into(),
            condition: condition_estimate(&covariance),
        })?;
    let z = DVector::<f64>::from_fn(k, |_, _| rng.sample(StandardNormal));
    let draw = mean + chol.l() * z;
    Ok(draw.iter().copied().collect())
}

/// Full conditional of `u_it⁺` (before truncation) given the other periods of
/// the same region.
///
/// The composite error is `τ_i = y_i − X_iβ − v_i1 + η_i⁺1 + u_i ~ N(0, Σ)`.
/// With `e = X_iβ + (v_i − η_i⁺)1 − y_i`, so that `τ_i = u_i − e`, the joint
/// kernel is
/// `exp(−½ u'Pu + u'Σ⁻¹e)` where `P = Σ⁻¹ + I/σ²_u = aI − b11'`; the
/// coordinate law follows from the precision form of the Gaussian
/// conditional, which coincides with the covariance (Schur complement) form
/// applied to `Ω = P⁻¹`, `μ = ΩΣ⁻¹e`.
pub fn u_plus_coordinate_conditional(
    cov: &CompoundSymmetricCov,
    sigma2_u: f64,
    e: &[f64],
    u: &[f64],
    t: usize,
) -> (f64, f64) {
    let s2e = cov.sigma2_eps();
    let a = 1.0 / s2e + 1.0 / sigma2_u;
    let b = cov.shrink() / s2e;
    let e_sum: f64 = e.iter().sum();
    let h_t = (e[t] - cov.shrink() * e_sum) / s2e;
    let others: f64 = u.iter().sum::<f64>() - u[t];
    let prec = a - b;
    ((h_t + b * others) / prec, 1.0 / prec)
}

pub fn update_u_plus<R: Rng + ?Sized>(
    state: &ParameterState,
    data: &PanelDataset,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let (n, t) = (data.n_regions(), data.n_periods());
    let cov = state.cov(t)?;
    let s2e = cov.sigma2_eps();
    let c = cov.shrink();
    let a = 1.0 / s2e + 1.0 / state.sigma2_u;
    let b = c / s2e;
    let prec = a - b;
    let sd = prec.recip().sqrt();

    let resid = regression_residuals(state, data);
    let mut out = state.u_plus.clone();
    let mut e = vec![0.0; t];
    for i in 0..n {
        let shift = state.v[i] - state.eta_plus[i];
        for s in 0..t {
            e[s] = shift - resid[i * t + s];
        }
        let e_sum: f64 = e.iter().sum();
        let u = &mut out[i * t..(i + 1) * t];
        let mut u_sum: f64 = u.iter().sum();
        for s in 0..t {
            let h = (e[s] - c * e_sum) / s2e;
            let others = u_sum - u[s];
            let mean = (h + b * others) / prec;
            let draw = truncated_normal_above(mean, sd, 0.0, rng);
            u_sum += draw - u[s];
            u[s] = draw;
        }
    }
    Ok(out)
}

/// Mean and variance of the untruncated normal kernel of `η_i⁺`:
/// `m_i = −ψ² 1'Σ⁻¹(y_i − X_iβ + u_i⁺ − v_i1)`, `ψ² = σ²_η / (1 + σ²_η 1'Σ⁻¹1)`.
pub fn eta_plus_conditional(
    state: &ParameterState,
    data: &PanelDataset,
    region: usize,
) -> Result<(f64, f64)> {
    let t = data.n_periods();
    let cov = state.cov(t)?;
    Ok(eta_moments(state, data, &cov, region))
}

fn eta_moments(
    state: &ParameterState,
    data: &PanelDataset,
    cov: &CompoundSymmetricCov,
    i: usize,
) -> (f64, f64) {
    let t = data.n_periods();
    let psi2 = state.sigma2_eta / (1.0 + state.sigma2_eta * cov.ones_quad());
    let sum: f64 = (0..t)
        .map(|s| {
            let c = i * t + s;
            data.y()[c] - dot(data.x_row(i, s), &state.beta) + state.u_plus[c] - state.v[i]
        })
        .sum();
    (-psi2 * sum / cov.block_variance(), psi2)
}

pub fn update_eta_plus<R: Rng + ?Sized>(
    state: &ParameterState,
    data: &PanelDataset,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let cov = state.cov(data.n_periods())?;
    Ok((0..data.n_regions())
        .map(|i| {
            let (m, psi2) = eta_moments(state, data, &cov, i);
            truncated_normal_above(m, psi2.sqrt(), 0.0, rng)
        })
        .collect())
}

/// Mean and variance of the normal full conditional of `v_i` given the
/// spatial field `v` (only the neighbours of `region` are read):
/// precision `1'Σ⁻¹1 + w_i+/σ²_v`, linear term
/// `1'Σ⁻¹(y_i − X_iβ + u_i⁺ + η_i⁺1) + Σ_j w_ij v_j/σ²_v`.
pub fn v_coordinate_conditional(
    state: &ParameterState,
    data: &PanelDataset,
    graph: &SpatialGraph,
    region: usize,
    v: &[f64],
) -> Result<(f64, f64)> {
    let cov = state.cov(data.n_periods())?;
    Ok(v_moments(state, data, graph, &cov, region, v))
}

fn v_moments(
    state: &ParameterState,
    data: &PanelDataset,
    graph: &SpatialGraph,
    cov: &CompoundSymmetricCov,
    i: usize,
    v: &[f64],
) -> (f64, f64) {
    let t = data.n_periods();
    let data_term: f64 = (0..t)
        .map(|s| {
            let c = i * t + s;
            data.y()[c] - dot(data.x_row(i, s), &state.beta) + state.u_plus[c] + state.eta_plus[i]
        })
        .sum::<f64>()
        / cov.block_variance();
    let var = 1.0 / (cov.ones_quad() + graph.row_sum(i) / state.sigma2_v);
    let mean = var * (data_term + graph.weighted_neighbor_sum(i, v) / state.sigma2_v);
    (mean, var)
}

/// Sequential sweep over regions; each region sees its neighbours' newest
/// values. With `center` the field is shifted to mean zero afterwards.
pub fn update_v<R: Rng + ?Sized>(
    state: &ParameterState,
    data: &PanelDataset,
    graph: &SpatialGraph,
    center: bool,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = data.n_regions();
    if graph.n_regions() != n {
        return Err(Error::validation(format!(
            "graph has {} regions, data has {n}",
            graph.n_regions()
        )));
    }
    let cov = state.cov(data.n_periods())?;
    let mut v = state.v.clone();
    for i in 0..n {
        let (mean, var) = v_moments(state, data, graph, &cov, i, &v);
        let z: f64 = rng.sample(StandardNormal);
        v[i] = mean + var.sqrt() * z;
    }
    if center {
        let m = v.iter().sum::<f64>() / n as f64;
        v.iter_mut().for_each(|x| *x -= m);
    }
    Ok(v)
}

/// `σ²_v = (Q̄_v + v'(D_w − W)v) / χ²(df)`.
pub fn update_sigma2_v<R: Rng + ?Sized>(
    state: &ParameterState,
    graph: &SpatialGraph,
    prior: &PriorConfig,
    car_df: CarDf,
    n_periods: usize,
    rng: &mut R,
) -> Result<f64> {
    let qf = graph.car_quadratic_form(&state.v)?;
    let df = car_df.degrees_of_freedom(graph.n_regions(), n_periods, prior.nbar_v);
    Ok((prior.qbar_v + qf) / sample_chi_squared(df, rng)?)
}

/// Inverse-gamma update `IG((N·T + v0_u)/2, (u'u + 2 v0_u log² r_u*)/2)`.
pub fn update_sigma2_u<R: Rng + ?Sized>(
    state: &ParameterState,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<f64> {
    let ss: f64 = state.u_plus.iter().map(|u| u * u).sum();
    let l = prior.r_star_u.ln();
    let shape = (state.u_plus.len() as f64 + prior.v0_u) / 2.0;
    let scale = (ss + 2.0 * prior.v0_u * l * l) / 2.0;
    sample_inverse_gamma(shape, scale, rng)
}

pub fn update_sigma2_eta<R: Rng + ?Sized>(
    state: &ParameterState,
    prior: &PriorConfig,
    rng: &mut R,
) -> Result<f64> {
    let ss: f64 = state.eta_plus.iter().map(|e| e * e).sum();
    let l = prior.r_star_eta.ln();
    let shape = (state.eta_plus.len() as f64 + prior.v0_eta) / 2.0;
    let scale = (ss + 2.0 * prior.v0_eta * l * l) / 2.0;
    sample_inverse_gamma(shape, scale, rng)
}

/// Sufficient statistics of the composite errors `r_i = y_i − X_iβ + u_i⁺ −
/// (v_i − η_i⁺)1` for the Gaussian likelihood through Σ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResidualSums {
    pub n_regions: usize,
    pub t_len: usize,
    /// `Σ_i r_i'r_i`.
    pub sum_squares: f64,
    /// `Σ_i (1'r_i)²`.
    pub sum_block_squares: f64,
}

impl ResidualSums {
    pub fn from_state(state: &ParameterState, data: &PanelDataset) -> Self {
        let (n, t) = (data.n_regions(), data.n_periods());
        let resid = regression_residuals(state, data);
        let mut ss = 0.0;
        let mut sbs = 0.0;
        for i in 0..n {
            let shift = state.v[i] - state.eta_plus[i];
            let mut block = 0.0;
            for s in 0..t {
                let r = resid[i * t + s] + state.u_plus[i * t + s] - shift;
                ss += r * r;
                block += r;
            }
            sbs += block * block;
        }
        Self {
            n_regions: n,
            t_len: t,
            sum_squares: ss,
            sum_block_squares: sbs,
        }
    }

    /// `Σ_i [−½ log|Σ| − ½ r_i'Σ⁻¹r_i]` up to a constant.
    pub fn log_likelihood(&self, sigma2_eps: f64, sigma2_alpha: f64) -> f64 {
        let t = self.t_len as f64;
        let block = sigma2_eps + t * sigma2_alpha;
        let log_det = (t - 1.0) * sigma2_eps.ln() + block.ln();
        let c = sigma2_alpha / block;
        let quad = (self.sum_squares - c * self.sum_block_squares) / sigma2_eps;
        -0.5 * self.n_regions as f64 * log_det - 0.5 * quad
    }
}

/// Log density of the scaled-inverse-χ² prior `Q̄/σ² ~ χ²(N̄)`, up to a constant.
pub fn log_scaled_inv_chi2_prior(s: f64, qbar: f64, nbar: f64) -> f64 {
    -(nbar / 2.0 + 1.0) * s.ln() - qbar / (2.0 * s)
}

/// One Metropolis–Hastings step with the proposal
/// `s' = s · (z / m₁)^h`, `z ~ χ²(1)`, `m₁` the χ²(1) median, `h = exponent`.
/// The Hastings ratio accounts for the asymmetric proposal density.
pub fn mh_scaled_chi2_step<R, F>(
    current: f64,
    exponent: f64,
    log_target: F,
    rng: &mut R,
) -> (f64, bool)
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    let chi = ChiSquared::new(1.0).expect("df 1");
    let z: f64 = chi.sample(rng);
    let proposal = current * (z / CHI2_1_MEDIAN).powf(exponent);
    if !(proposal > 0.0 && proposal.is_finite()) {
        return (current, false);
    }
    // reverse move needs z_r with s = s'·(z_r/m₁)^h
    let z_rev = CHI2_1_MEDIAN * (current / proposal).powf(1.0 / exponent);
    // log q(s'|s) = log f(z) + log z − log(h s') with f the χ²(1) density
    let log_fz = |z: f64| 0.5 * z.ln() - 0.5 * z;
    let log_hastings = (log_fz(z_rev) - current.ln()) - (log_fz(z) - proposal.ln());
    let log_ratio = log_target(proposal) - log_target(current) + log_hastings;
    let u: f64 = rng.random();
    if log_ratio >= 0.0 || u.ln() < log_ratio {
        (proposal, true)
    } else {
        (current, false)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MhOutcome {
    pub sigma2_alpha: f64,
    pub sigma2_eps: f64,
    /// `[σ²_α accepted, σ²_ε accepted]`.
    pub accepted: [bool; 2],
}

/// Metropolis–Hastings updates of σ²_α then σ²_ε (the second sees the first's
/// result), each targeting the Gaussian likelihood through Σ times its
/// scaled-inverse-χ² prior.
pub fn update_sigma2_alpha_eps_mh<R: Rng + ?Sized>(
    state: &ParameterState,
    data: &PanelDataset,
    prior: &PriorConfig,
    step_alpha: f64,
    step_eps: f64,
    rng: &mut R,
) -> Result<MhOutcome> {
    let sums = ResidualSums::from_state(state, data);
    Ok(mh_variance_pair(
        state, &sums, prior, step_alpha, step_eps, true, true, rng,
    ))
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn mh_variance_pair<R: Rng + ?Sized>(
    state: &ParameterState,
    sums: &ResidualSums,
    prior: &PriorConfig,
    step_alpha: f64,
    step_eps: f64,
    do_alpha: bool,
    do_eps: bool,
    rng: &mut R,
) -> MhOutcome {
    let mut s2a = state.sigma2_alpha;
    let mut s2e = state.sigma2_eps;
    let mut accepted = [false; 2];
    if do_alpha {
        let target = |s: f64| {
            sums.log_likelihood(s2e, s)
                + log_scaled_inv_chi2_prior(s, prior.qbar_alpha, prior.nbar_alpha)
        };
        let (next, acc) = mh_scaled_chi2_step(s2a, step_alpha, target, rng);
        s2a = next;
        accepted[0] = acc;
    }
    if do_eps {
        let target = |s: f64| {
            sums.log_likelihood(s, s2a)
                + log_scaled_inv_chi2_prior(s, prior.qbar_eps, prior.nbar_eps)
        };
        let (next, acc) = mh_scaled_chi2_step(s2e, step_eps, target, rng);
        s2e = next;
        accepted[1] = acc;
    }
    MhOutcome {
        sigma2_alpha: s2a,
        sigma2_eps: s2e,
        accepted,
    }
}
