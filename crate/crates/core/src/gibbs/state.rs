use crate::error::{Error, Result};
use crate::gibbs::config::PriorConfig;
use crate::kernels::CompoundSymmetricCov;
use crate::panel::PanelDataset;

/// One full draw of the augmented parameter vector.
///
/// The heterogeneity terms α_i are integrated out through Σ and are never
/// part of the state.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterState {
    pub beta: Vec<f64>,
    /// Region-major `N × T`.
    pub u_plus: Vec<f64>,
    pub eta_plus: Vec<f64>,
    pub v: Vec<f64>,
    pub sigma2_alpha: f64,
    pub sigma2_eps: f64,
    pub sigma2_v: f64,
    pub sigma2_u: f64,
    pub sigma2_eta: f64,
}

impl ParameterState {
    pub fn cov(&self, t_len: usize) -> Result<CompoundSymmetricCov> {
        CompoundSymmetricCov::new(self.sigma2_eps, self.sigma2_alpha, t_len)
    }

    pub fn check_shape(&self, data: &PanelDataset) -> Result<()> {
        let (n, t, k) = (data.n_regions(), data.n_periods(), data.k_regressors());
        if self.beta.len() != k
            || self.u_plus.len() != n * t
            || self.eta_plus.len() != n
            || self.v.len() != n
        {
            return Err(Error::invalid(format!(
                "state shape (K={}, u={}, eta={}, v={}) does not match data (N={n}, T={t}, K={k})",
                self.beta.len(),
                self.u_plus.len(),
                self.eta_plus.len(),
                self.v.len()
            )));
        }
        Ok(())
    }

    /// Positivity of the one-sided terms and of all five variances.
    pub fn validate(&self) -> Result<()> {
        if let Some(i) = self.u_plus.iter().position(|&u| !(u > 0.0)) {
            return Err(Error::validation(format!(
                "u_plus[{i}] = {} is not positive",
                self.u_plus[i]
            )));
        }
        if let Some(i) = self.eta_plus.iter().position(|&e| !(e > 0.0)) {
            return Err(Error::validation(format!(
                "eta_plus[{i}] = {} is not positive",
                self.eta_plus[i]
            )));
        }
        for (name, s) in self.named_variances() {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::validation(format!(
                    "{name} = {s} is not a positive variance"
                )));
            }
        }
        Ok(())
    }

    pub fn named_variances(&self) -> [(&'static str, f64); 5] {
        [
            ("sigma2_alpha", self.sigma2_alpha),
            ("sigma2_eps", self.sigma2_eps),
            ("sigma2_v", self.sigma2_v),
            ("sigma2_u", self.sigma2_u),
            ("sigma2_eta", self.sigma2_eta),
        ]
    }

    /// Starting point: pooled least squares for β, one-sided terms at the
    /// half-normal means implied by the prior medians, `v = 0`, and the
    /// two-sided variances split evenly from the residual variance.
    pub fn initial(data: &PanelDataset, prior: &PriorConfig) -> Self {
        let (n, t, k) = (data.n_regions(), data.n_periods(), data.k_regressors());
        let beta = pooled_ols(data).unwrap_or_else(|| vec![0.0; k]);
        let resid: Vec<f64> = (0..n * t)
            .map(|c| {
                let (i, s) = (c / t, c % t);
                data.y()[c] - dot(data.x_row(i, s), &beta)
            })
            .collect();
        let mean = resid.iter().sum::<f64>() / resid.len() as f64;
        let var = resid.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / resid.len() as f64;
        let two_sided = (var / 3.0).max(1e-4);
        let s2u = prior.r_star_u.ln().powi(2);
        let s2e = prior.r_star_eta.ln().powi(2);
        let half_normal_mean = |s2: f64| (2.0 * s2 / std::f64::consts::PI).sqrt();
        Self {
            beta,
            u_plus: vec![half_normal_mean(s2u); n * t],
            eta_plus: vec![half_normal_mean(s2e); n],
            v: vec![0.0; n],
            sigma2_alpha: two_sided,
            sigma2_eps: two_sided,
            sigma2_v: two_sided,
            sigma2_u: s2u,
            sigma2_eta: s2e,
        }
    }

    /// Relabels regions so that old region `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize], t_len: usize) -> Self {
        let mut out = self.clone();
        for (old, &new) in perm.iter().enumerate() {
            out.eta_plus[new] = self.eta_plus[old];
            out.v[new] = self.v[old];
            out.u_plus[new * t_len..(new + 1) * t_len]
                .copy_from_slice(&self.u_plus[old * t_len..(old + 1) * t_len]);
        }
        out
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn pooled_ols(data: &PanelDataset) -> Option<Vec<f64>> {
    let k = data.k_regressors();
    let mut xtx = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut xty = nalgebra::DVector::<f64>::zeros(k);
    for c in 0..data.n_cells() {
        let row = &data.x()[c * k..(c + 1) * k];
        for a in 0..k {
            xty[a] += row[a] * data.y()[c];
            for b in 0..k {
                xtx[(a, b)] += row[a] * row[b];
            }
        }
    }
    let sol = xtx.cholesky()?.solve(&xty);
    Some(sol.iter().copied().collect())
}
