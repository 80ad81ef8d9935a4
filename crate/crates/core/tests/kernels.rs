mod common;

use common::{adaptive_simpson, mean, median, random_spd, variance};
use hiddenpop::gibbs::PriorConfig;
use hiddenpop::kernels::{
    conditional_mvn, sample_inverse_gamma, sample_truncated_normal, sigma_inverse,
    CompoundSymmetricCov, TruncatedNormalSpec,
};
use hiddenpop::RandomStream;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

proptest! {
    #[test]
    fn rank_one_inverse_matches_dense_lu(
        s2e in 0.01f64..4.0,
        s2a in 0.0f64..4.0,
        t in 1usize..=20,
    ) {
        let cov = CompoundSymmetricCov::new(s2e, s2a, t).unwrap();
        let (inv, log_det) = sigma_inverse(&cov);
        let dense = cov.dense();
        let oracle = dense.clone().lu().try_inverse().unwrap();
        for i in 0..t {
            for j in 0..t {
                prop_assert!((inv[(i, j)] - oracle[(i, j)]).abs() < 1e-10);
            }
        }
        let det = dense.lu().determinant();
        prop_assert!((log_det - det.ln()).abs() < 1e-9 * det.ln().abs().max(1.0));
    }

    #[test]
    fn quadratic_forms_match_dense(
        s2e in 0.01f64..2.0,
        s2a in 0.0f64..2.0,
        a in prop::collection::vec(-3.0f64..3.0, 1..=12),
        shift in -1.0f64..1.0,
    ) {
        let t = a.len();
        let b: Vec<f64> = a.iter().map(|x| x * 0.5 + shift).collect();
        let cov = CompoundSymmetricCov::new(s2e, s2a, t).unwrap();
        let inv = cov.dense().try_inverse().unwrap();
        let va = nalgebra::DVector::from_column_slice(&a);
        let vb = nalgebra::DVector::from_column_slice(&b);
        let want = va.dot(&(&inv * &vb));
        prop_assert!((cov.quad(&a, &b) - want).abs() < 1e-9 * want.abs().max(1.0));
        let ones = nalgebra::DVector::from_element(t, 1.0);
        let want_ones = ones.dot(&(&inv * &ones));
        prop_assert!((cov.ones_quad() - want_ones).abs() < 1e-10 * want_ones.max(1.0));
        prop_assert!((cov.ones_dot(&a) - ones.dot(&(&inv * &va))).abs() < 1e-9);
    }

    #[test]
    fn truncated_draws_respect_the_bound(
        mean in -20.0f64..20.0,
        sd in 0.01f64..5.0,
        lb in -5.0f64..5.0,
        seed in any::<u64>(),
    ) {
        let spec = TruncatedNormalSpec::new(mean, sd * sd, lb).unwrap();
        let mut rng = RandomStream::new(seed);
        for _ in 0..50 {
            let x = sample_truncated_normal(&spec, &mut rng).unwrap();
            prop_assert!(x > lb && x.is_finite());
        }
    }
}

/// Conditional law of one coordinate through the precision matrix
/// `Q = Ω⁻¹`: `var = 1/Q_ii`, `mean = μ_i − Σ_{j≠i} Q_ij (x_j − μ_j) / Q_ii`.
fn precision_route(mu: &[f64], cov: &DMatrix<f64>, index: usize, others: &[f64]) -> (f64, f64) {
    let q = cov.clone().try_inverse().unwrap();
    let rest: Vec<usize> = (0..mu.len()).filter(|&j| j != index).collect();
    let shift: f64 = rest
        .iter()
        .zip(others)
        .map(|(&j, &x)| q[(index, j)] * (x - mu[j]))
        .sum();
    (
        mu[index] - shift / q[(index, index)],
        1.0 / q[(index, index)],
    )
}

#[test]
fn conditional_mvn_matches_block_inversion_on_random_spd() {
    let mut rng = RandomStream::new(11);
    for trial in 0..1000 {
        let d = 2 + trial % 7;
        let cov = random_spd(d, 0.5, &mut rng);
        let mu: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let index = rng.random_range(0..d);
        let others: Vec<f64> = (0..d - 1).map(|_| rng.sample(StandardNormal)).collect();
        let (m, v) = conditional_mvn(&mu, &cov, index, &others).unwrap();
        let (m0, v0) = precision_route(&mu, &cov, index, &others);
        assert!((m - m0).abs() < 1e-9, "trial {trial}: mean {m} vs {m0}");
        assert!((v - v0).abs() < 1e-9, "trial {trial}: var {v} vs {v0}");
    }
}

#[test]
fn truncated_far_tail_mean_matches_quadrature() {
    // N(−5, 1) density on x > 0, rescaled by exp(12.5)
    let density = |x: f64| (-5.0 * x - 0.5 * x * x).exp();
    let mass = adaptive_simpson(&density, 0.0, 12.0, 1e-14);
    let first = adaptive_simpson(&|x| x * density(x), 0.0, 12.0, 1e-14);
    let oracle = first / mass;
    // E[X | X > 0] for N(−5, 1): inverse Mills ratio 1/(5 + …) ≈ 0.1865
    assert!((oracle - 0.1865).abs() < 1e-3, "{oracle}");

    let spec = TruncatedNormalSpec::positive(-5.0, 1.0).unwrap();
    let mut rng = RandomStream::new(3);
    let draws: Vec<f64> = (0..1_000_000)
        .map(|_| sample_truncated_normal(&spec, &mut rng).unwrap())
        .collect();
    assert!(draws.iter().all(|&x| x > 0.0));
    assert!((mean(&draws) - oracle).abs() < 0.02);
}

#[test]
fn truncated_standard_half_normal_moments() {
    let spec = TruncatedNormalSpec::positive(0.0, 1.0).unwrap();
    let mut rng = RandomStream::new(5);
    let draws: Vec<f64> = (0..1_000_000)
        .map(|_| sample_truncated_normal(&spec, &mut rng).unwrap())
        .collect();
    let pi = std::f64::consts::PI;
    assert!((mean(&draws) - (2.0 / pi).sqrt()).abs() < 0.01);
    assert!((variance(&draws) - (1.0 - 2.0 / pi)).abs() < 0.01);
}

/// Draws a one-sided term from its hierarchical prior: σ² from the
/// inverse-gamma hyperprior, then a half-normal with that variance.
fn prior_predictive_report_rate(shape: f64, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = RandomStream::new(seed);
    (0..1_000_000)
        .map(|_| {
            let s2 = sample_inverse_gamma(shape, scale, &mut rng).unwrap();
            let z: f64 = rng.sample(StandardNormal);
            (-(s2.sqrt() * z.abs())).exp()
        })
        .collect()
}

#[test]
fn hyperpriors_center_the_report_rates() {
    let prior = PriorConfig::default();
    let (shape_u, scale_u) = prior.sigma2_u_prior();
    assert_eq!(shape_u, 5.0);
    assert!((scale_u - 10.0 * 0.85f64.ln().powi(2)).abs() < 1e-12);
    assert!((scale_u - 0.2641).abs() < 1e-4);

    let rates_u = prior_predictive_report_rate(shape_u, scale_u, 7);
    assert!(
        (median(&rates_u) - 0.85).abs() < 0.02,
        "{}",
        median(&rates_u)
    );

    let (shape_eta, scale_eta) = prior.sigma2_eta_prior();
    let rates_eta = prior_predictive_report_rate(shape_eta, scale_eta, 8);
    assert!(
        (median(&rates_eta) - 0.70).abs() < 0.02,
        "{}",
        median(&rates_eta)
    );
}

#[test]
fn inverse_gamma_moments() {
    let mut rng = RandomStream::new(9);
    let draws: Vec<f64> = (0..1_000_000)
        .map(|_| sample_inverse_gamma(3.0, 4.0, &mut rng).unwrap())
        .collect();
    assert!((mean(&draws) - 2.0).abs() < 0.01);
    for _ in 0..10_000 {
        assert!(sample_inverse_gamma(5.0, 2.0, &mut rng).unwrap() > 0.0);
    }
    assert!(sample_inverse_gamma(0.0, 1.0, &mut rng).is_err());
    assert!(sample_inverse_gamma(1.0, -1.0, &mut rng).is_err());
}
