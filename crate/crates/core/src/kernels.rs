//! Probability kernels used by the sampler updates.
//!
//! The error covariance of one region's stacked panel, `Σ = σ²_ε I_T + σ²_α 1 1'`,
//! is handled through its rank-one closed form; nothing here stores a dense
//! `T×T` matrix except [`CompoundSymmetricCov::inverse_dense`] and
//! [`CompoundSymmetricCov::dense`], which exist for reporting and oracles.

use std::f64::consts::SQRT_2;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp, Gamma};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};

/// Standardized lower bound above which the exponential-rejection sampler
/// replaces the inverse-CDF path.
const TAIL_SWITCH: f64 = 4.0;

/// `Σ = σ²_ε I_T + σ²_α 1_T 1_T'`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompoundSymmetricCov {
    sigma2_eps: f64,
    sigma2_alpha: f64,
    t_len: usize,
}

impl CompoundSymmetricCov {
    pub fn new(sigma2_eps: f64, sigma2_alpha: f64, t_len: usize) -> Result<Self> {
        if !(sigma2_eps > 0.0 && sigma2_eps.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma2_eps must be positive and finite, got {sigma2_eps}"
            )));
        }
        if !(sigma2_alpha >= 0.0 && sigma2_alpha.is_finite()) {
            return Err(Error::invalid(format!(
                "sigma2_alpha must be nonnegative and finite, got {sigma2_alpha}"
            )));
        }
        if t_len == 0 {
            return Err(Error::invalid("panel length must be at least 1"));
        }
        Ok(Self {
            sigma2_eps,
            sigma2_alpha,
            t_len,
        })
    }

    pub fn sigma2_eps(&self) -> f64 {
        self.sigma2_eps
    }

    pub fn sigma2_alpha(&self) -> f64 {
        self.sigma2_alpha
    }

    pub fn t_len(&self) -> usize {
        self.t_len
    }

    /// `σ²_ε + T σ²_α`, the eigenvalue of Σ along the constant vector.
    #[inline]
    pub fn block_variance(&self) -> f64 {
        self.sigma2_eps + self.t_len as f64 * self.sigma2_alpha
    }

    /// Coefficient `c` in `Σ⁻¹ = (I − c 1 1') / σ²_ε`.
    #[inline]
    pub fn shrink(&self) -> f64 {
        self.sigma2_alpha / self.block_variance()
    }

    /// `a' Σ⁻¹ b` in O(T).
    pub fn quad(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.t_len);
        debug_assert_eq!(b.len(), self.t_len);
        let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
        let sa: f64 = a.iter().sum();
        let sb: f64 = b.iter().sum();
        (dot - self.shrink() * sa * sb) / self.sigma2_eps
    }

    /// `1' Σ⁻¹ a = Σ_t a_t / (σ²_ε + T σ²_α)`.
    #[inline]
    pub fn ones_dot(&self, a: &[f64]) -> f64 {
        a.iter().sum::<f64>() / self.block_variance()
    }

    /// `1' Σ⁻¹ 1 = T / (σ²_ε + T σ²_α)`.
    #[inline]
    pub fn ones_quad(&self) -> f64 {
        self.t_len as f64 / self.block_variance()
    }

    /// `log|Σ| = (T−1) log σ²_ε + log(σ²_ε + T σ²_α)`.
    pub fn log_det(&self) -> f64 {
        (self.t_len as f64 - 1.0) * self.sigma2_eps.ln() + self.block_variance().ln()
    }

    /// `Σ⁻¹ a` written into `out`.
    pub fn solve_into(&self, a: &[f64], out: &mut [f64]) {
        let shift = self.shrink() * a.iter().sum::<f64>();
        for (o, x) in out.iter_mut().zip(a) {
            *o = (x - shift) / self.sigma2_eps;
        }
    }

    pub fn inverse_dense(&self) -> DMatrix<f64> {
        let t = self.t_len;
        let c = self.shrink();
        DMatrix::from_fn(t, t, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            (id - c) / self.sigma2_eps
        })
    }

    pub fn dense(&self) -> DMatrix<f64> {
        let t = self.t_len;
        DMatrix::from_fn(t, t, |i, j| {
            self.sigma2_alpha + if i == j { self.sigma2_eps } else { 0.0 }
        })
    }
}

/// Closed-form inverse of the compound-symmetric covariance together with its
/// log-determinant.
pub fn sigma_inverse(cov: &CompoundSymmetricCov) -> (DMatrix<f64>, f64) {
    (cov.inverse_dense(), cov.log_det())
}

/// A normal law conditioned on exceeding `lower_bound`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncatedNormalSpec {
    pub mean: f64,
    pub variance: f64,
    pub lower_bound: f64,
}

impl TruncatedNormalSpec {
    pub fn new(mean: f64, variance: f64, lower_bound: f64) -> Result<Self> {
        let spec = Self {
            mean,
            variance,
            lower_bound,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Half-line `(0, ∞)` truncation used throughout the model.
    pub fn positive(mean: f64, variance: f64) -> Result<Self> {
        Self::new(mean, variance, 0.0)
    }

    fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() || !self.variance.is_finite() || !self.lower_bound.is_finite() {
            return Err(Error::invalid(format!(
                "truncated normal parameters must be finite (mean {}, variance {}, bound {})",
                self.mean, self.variance, self.lower_bound
            )));
        }
        if self.variance <= 0.0 {
            return Err(Error::invalid(format!(
                "truncated normal variance must be positive, got {}",
                self.variance
            )));
        }
        Ok(())
    }
}

pub fn sample_truncated_normal<R: Rng + ?Sized>(
    spec: &TruncatedNormalSpec,
    rng: &mut R,
) -> Result<f64> {
    spec.validate()?;
    Ok(truncated_normal_above(
        spec.mean,
        spec.variance.sqrt(),
        spec.lower_bound,
        rng,
    ))
}

/// Draw from N(mean, sd²) restricted to `(lower, ∞)`; arguments are trusted.
pub(crate) fn truncated_normal_above<R: Rng + ?Sized>(
    mean: f64,
    sd: f64,
    lower: f64,
    rng: &mut R,
) -> f64 {
    let a = (lower - mean) / sd;
    loop {
        let z = if a > TAIL_SWITCH {
            standard_tail_rejection(a, rng)
        } else {
            standard_upper_inverse_cdf(a, rng)
        };
        let x = mean + sd * z;
        if x > lower {
            return x;
        }
    }
}

/// Inverse-CDF draw of `Z | Z > a` through the upper-tail probability, which
/// keeps full relative precision for `a` up to the tail switch.
fn standard_upper_inverse_cdf<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    // 2·Q(a) = erfc(a/√2)
    let tail2 = erfc(a / SQRT_2);
    loop {
        let v: f64 = 1.0 - rng.random::<f64>();
        let z = SQRT_2 * erfc_inv(v * tail2);
        if z > a && z.is_finite() {
            return z;
        }
    }
}

/// Robert's translated-exponential rejection sampler for `Z | Z > a`, a > 0.
fn standard_tail_rejection<R: Rng + ?Sized>(a: f64, rng: &mut R) -> f64 {
    let rate = 0.5 * (a + (a * a + 4.0).sqrt());
    let exp = Exp::new(rate).expect("positive rate");
    loop {
        let z = a + exp.sample(rng);
        let d = z - rate;
        if rng.random::<f64>() <= (-0.5 * d * d).exp() {
            return z;
        }
    }
}

/// Univariate conditional law of component `index` of N(mean, cov) given the
/// remaining components fixed at `others` (in their original order).
pub fn conditional_mvn(
    mean: &[f64],
    cov: &DMatrix<f64>,
    index: usize,
    others: &[f64],
) -> Result<(f64, f64)> {
    let t = mean.len();
    if cov.nrows() != t || cov.ncols() != t {
        return Err(Error::invalid(format!(
            "covariance is {}×{}, mean has length {t}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    if index >= t {
        return Err(Error::invalid(format!(
            "index {index} out of range for dimension {t}"
        )));
    }
    if others.len() + 1 != t {
        return Err(Error::invalid(format!(
            "expected {} conditioning values, got {}",
            t - 1,
            others.len()
        )));
    }
    if t == 1 {
        return Ok((mean[0], cov[(0, 0)]));
    }

    let rest: Vec<usize> = (0..t).filter(|&j| j != index).collect();
    let m = t - 1;
    let omega22 = DMatrix::from_fn(m, m, |a, b| cov[(rest[a], rest[b])]);
    let omega12 = nalgebra::DVector::from_fn(m, |a, _| cov[(index, rest[a])]);
    let centered = nalgebra::DVector::from_fn(m, |a, _| others[a] - mean[rest[a]]);

    let chol = omega22.clone().cholesky().ok_or_else(|| Error::Numerical {
        message: format!("conditioning block for component {index} is not positive definite"),
        condition: condition_estimate(&omega22),
    })?;
    let weights = chol.solve(&omega12);
    let cond_mean = mean[index] + weights.dot(&centered);
    let cond_var = cov[(index, index)] - weights.dot(&omega12);
    if !(cond_var > 0.0) {
        return Err(Error::Numerical {
            message: format!("non-positive conditional variance {cond_var} for component {index}"),
            condition: condition_estimate(&omega22),
        });
    }
    Ok((cond_mean, cond_var))
}

/// Ratio of extreme absolute eigenvalues of a symmetric matrix.
pub(crate) fn condition_estimate(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let min = eig.iter().fold(f64::INFINITY, |acc, x| acc.min(x.abs()));
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse-gamma draw with density ∝ x^(−shape−1) exp(−scale/x).
pub fn sample_inverse_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && shape.is_finite()) || !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!(
            "inverse-gamma needs positive shape and scale, got ({shape}, {scale})"
        )));
    }
    let gamma = Gamma::new(shape, 1.0 / scale)
        .map_err(|e| Error::invalid(format!("inverse-gamma: {e}")))?;
    Ok(1.0 / gamma.sample(rng))
}

pub fn sample_chi_squared<R: Rng + ?Sized>(df: f64, rng: &mut R) -> Result<f64> {
    let chi = ChiSquared::new(df).map_err(|e| Error::invalid(format!("chi-squared({df}): {e}")))?;
    Ok(chi.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RandomStream;

    #[test]
    fn diagonal_case_inverse() {
        let cov = CompoundSymmetricCov::new(0.25, 0.0, 4).unwrap();
        let (inv, log_det) = sigma_inverse(&cov);
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { 4.0 } else { 0.0 };
                assert!((inv[(i, j)] - want).abs() < 1e-14);
            }
        }
        assert!((log_det - 4.0 * 0.25_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn scalar_case_inverse() {
        let cov = CompoundSymmetricCov::new(0.04, 0.25, 1).unwrap();
        let (inv, log_det) = sigma_inverse(&cov);
        assert!((inv[(0, 0)] - 1.0 / 0.29).abs() < 1e-12);
        assert!((log_det - 0.29_f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn three_by_three_matches_dense_lu() {
        let cov = CompoundSymmetricCov::new(0.01, 0.01, 3).unwrap();
        let dense_inv = cov.dense().lu().try_inverse().unwrap();
        let inv = cov.inverse_dense();
        for (a, b) in inv.iter().zip(dense_inv.iter()) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
        let det = cov.dense().determinant();
        assert!((cov.log_det() - det.ln()).abs() < 1e-10);
    }

    #[test]
    fn rejects_bad_covariance() {
        assert!(CompoundSymmetricCov::new(0.0, 1.0, 3).is_err());
        assert!(CompoundSymmetricCov::new(1.0, -1.0, 3).is_err());
        assert!(CompoundSymmetricCov::new(1.0, 1.0, 0).is_err());
    }

    #[test]
    fn rank_one_products_match_dense() {
        let cov = CompoundSymmetricCov::new(0.3, 0.7, 5).unwrap();
        let inv = cov.inverse_dense();
        let a = [0.1, -2.0, 0.5, 3.0, 1.5];
        let b = [1.0, 0.2, -0.3, 0.0, 2.2];
        let va = nalgebra::DVector::from_row_slice(&a);
        let vb = nalgebra::DVector::from_row_slice(&b);
        let dense = va.dot(&(&inv * &vb));
        assert!((cov.quad(&a, &b) - dense).abs() < 1e-12);
        let ones = nalgebra::DVector::from_element(5, 1.0);
        assert!((cov.ones_quad() - ones.dot(&(&inv * &ones))).abs() < 1e-12);
        assert!((cov.ones_dot(&a) - ones.dot(&(&inv * &va))).abs() < 1e-12);
        let mut out = [0.0; 5];
        cov.solve_into(&a, &mut out);
        let want = &inv * &va;
        for (o, w) in out.iter().zip(want.iter()) {
            assert!((o - w).abs() < 1e-12);
        }
    }

    #[test]
    fn truncated_normal_rejects_non_finite() {
        assert!(TruncatedNormalSpec::new(f64::NAN, 1.0, 0.0).is_err());
        assert!(TruncatedNormalSpec::new(0.0, f64::INFINITY, 0.0).is_err());
        assert!(TruncatedNormalSpec::new(0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn half_normal_moments() {
        let mut rng = RandomStream::new(11);
        let spec = TruncatedNormalSpec::positive(0.0, 1.0).unwrap();
        let n = 1_000_000;
        let draws: Vec<f64> = (0..n)
            .map(|_| sample_truncated_normal(&spec, &mut rng).unwrap())
            .collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let pi = std::f64::consts::PI;
        assert!((mean - (2.0 / pi).sqrt()).abs() < 0.01, "mean {mean}");
        assert!((var - (1.0 - 2.0 / pi)).abs() < 0.01, "var {var}");
    }

    #[test]
    fn deep_tail_stays_above_bound() {
        let mut rng = RandomStream::new(5);
        for &mean in &[-5.0, -40.0, -1e3] {
            for _ in 0..10_000 {
                let x = truncated_normal_above(mean, 1.0, 0.0, &mut rng);
                assert!(x > 0.0);
            }
        }
    }

    #[test]
    fn bivariate_conditional() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let (m, v) = conditional_mvn(&[0.0, 0.0], &cov, 0, &[1.0]).unwrap();
        assert!((m - 0.5).abs() < 1e-14);
        assert!((v - 0.75).abs() < 1e-14);
    }

    #[test]
    fn diagonal_conditional_is_marginal() {
        let cov = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&[1.0, 2.0, 3.0]));
        let (m, v) = conditional_mvn(&[4.0, 5.0, 6.0], &cov, 1, &[10.0, -3.0]).unwrap();
        assert_eq!((m, v), (5.0, 2.0));
    }

    #[test]
    fn singular_block_is_reported() {
        let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.1, 0.1, 0.1, 1.0, 1.0, 0.1, 1.0, 1.0]);
        match conditional_mvn(&[0.0; 3], &cov, 0, &[0.0, 0.0]) {
            Err(Error::Numerical { condition, .. }) => assert!(condition > 1e10),
            other => panic!("expected numerical error, got {other:?}"),
        }
    }

    #[test]
    fn conditional_argument_checks() {
        let cov = DMatrix::identity(3, 3);
        assert!(conditional_mvn(&[0.0; 3], &cov, 3, &[0.0, 0.0]).is_err());
        assert!(conditional_mvn(&[0.0; 3], &cov, 0, &[0.0]).is_err());
    }

    #[test]
    fn inverse_gamma_mean_and_support() {
        let mut rng = RandomStream::new(3);
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| sample_inverse_gamma(3.0, 4.0, &mut rng).unwrap())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 2.0).abs() < 0.01, "mean {mean}");
        for _ in 0..10_000 {
            assert!(sample_inverse_gamma(5.0, 2.0, &mut rng).unwrap() > 0.0);
        }
        assert!(sample_inverse_gamma(0.0, 1.0, &mut rng).is_err());
        assert!(sample_inverse_gamma(1.0, -1.0, &mut rng).is_err());
    }
}
