//! End-to-end acceptance checks. Runs without the libtest harness so that
//! every criterion reports a line even when an earlier one fails.

mod common;

use std::process::ExitCode;
use std::thread;
use std::time::Instant;

use common::{adaptive_simpson, mean, random_panel, random_spd, variance};
use hiddenpop::analysis::{
    beta_binomial_coverage, coverage_report, hdi, hidden_population_intervals, mape_summary,
    MapeVariant,
};
use hiddenpop::gibbs::{beta_conditional, run_chain_from};
use hiddenpop::kernels::{
    conditional_mvn, sample_truncated_normal, sigma_inverse, CompoundSymmetricCov,
    TruncatedNormalSpec,
};
use hiddenpop::simulation::make_lambda_scenario;
use hiddenpop::sir::exceedance_probability;
use hiddenpop::spatial::build_queen_grid;
use hiddenpop::{
    run_chain, simulate, ChainConfig, DgpConfig, EpsLaw, ParameterState, PosteriorDraws,
    PriorConfig, RandomStream, SimulatedTruth, UpdateMask,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;

const BETA_TRUE: [f64; 2] = [0.5, -0.5];

struct Outcome {
    label: &'static str,
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(label: &'static str, pass: bool, detail: String) -> Self {
        Self {
            label,
            pass,
            detail,
        }
    }
}

fn grid(rows: usize, periods: usize, seed: u64) -> DgpConfig {
    DgpConfig {
        rows,
        cols: rows,
        periods,
        seed,
        ..DgpConfig::default()
    }
}

fn fit(sim: &SimulatedTruth, seed: u64) -> PosteriorDraws {
    let config = ChainConfig {
        seed,
        ..ChainConfig::default()
    };
    run_chain(&sim.dataset, &sim.graph, &PriorConfig::default(), &config).expect("chain")
}

fn posterior_mean(d: &PosteriorDraws, f: impl Fn(&ParameterState) -> f64) -> f64 {
    mean(&d.series(f))
}

fn beta_hdi(d: &PosteriorDraws, k: usize) -> (f64, f64) {
    hdi(&d.series(|s| s.beta[k]), 0.95).expect("hdi")
}

fn recovery_small_panel() -> Outcome {
    let spans = [
        ("sigma_eta", (0.387, 0.576)),
        ("sigma_u", (0.156, 0.249)),
        ("sigma_v", (0.185, 0.513)),
        ("sigma_eps", (0.059, 0.131)),
    ];
    let runs: Vec<PosteriorDraws> = thread::scope(|scope| {
        let handles: Vec<_> = (1..=5u64)
            .map(|seed| {
                scope.spawn(move || fit(&simulate(&grid(7, 5, seed)).expect("simulate"), seed))
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut pass = true;
    let mut detail = Vec::new();
    for (seed, d) in (1..=5).zip(&runs) {
        for (k, truth) in BETA_TRUE.iter().enumerate() {
            let (lo, hi) = beta_hdi(d, k);
            let m = posterior_mean(d, |s| s.beta[k]);
            let ok = lo <= *truth && *truth <= hi && (m - truth).abs() <= 0.05;
            pass &= ok;
            if !ok {
                detail.push(format!(
                    "seed {seed} beta{} mean {m:.3} hdi ({lo:.3}, {hi:.3})",
                    k + 1
                ));
            }
        }
    }
    let sds: [fn(&ParameterState) -> f64; 4] = [
        |s| s.sigma2_eta.sqrt(),
        |s| s.sigma2_u.sqrt(),
        |s| s.sigma2_v.sqrt(),
        |s| s.sigma2_eps.sqrt(),
    ];
    for ((name, (lo, hi)), f) in spans.iter().zip(sds) {
        let avg = mean(
            &runs
                .iter()
                .map(|d| posterior_mean(d, f))
                .collect::<Vec<_>>(),
        );
        let ok = *lo <= avg && avg <= *hi;
        pass &= ok;
        detail.push(format!(
            "{name} {avg:.3} in ({lo}, {hi}) {}",
            if ok { "ok" } else { "MISS" }
        ));
    }
    let b1 = mean(
        &runs
            .iter()
            .map(|d| posterior_mean(d, |s| s.beta[0]))
            .collect::<Vec<_>>(),
    );
    let b2 = mean(
        &runs
            .iter()
            .map(|d| posterior_mean(d, |s| s.beta[1]))
            .collect::<Vec<_>>(),
    );
    detail.insert(0, format!("beta means {b1:.3}, {b2:.3}"));
    Outcome::new(
        "parameter recovery, N=49 T=5, seeds 1-5",
        pass,
        detail.join("; "),
    )
}

fn shrinkage() -> Outcome {
    let (small, large) = thread::scope(|scope| {
        let a = scope.spawn(|| fit(&simulate(&grid(7, 5, 1)).expect("simulate"), 1));
        let b = scope.spawn(|| fit(&simulate(&grid(14, 10, 1)).expect("simulate"), 1));
        (a.join().unwrap(), b.join().unwrap())
    });
    let width = |d: &PosteriorDraws| {
        let (lo, hi) = beta_hdi(d, 0);
        hi - lo
    };
    let (ws, wl) = (width(&small), width(&large));
    Outcome::new(
        "beta1 HDI narrows from N=49 T=5 to N=196 T=10",
        wl < ws,
        format!("widths {ws:.4} -> {wl:.4}"),
    )
}

fn coverage() -> Outcome {
    let sim = simulate(&grid(10, 10, 1)).expect("simulate");
    let d = fit(&sim, 1);
    let y = sim.dataset.y_level();
    let mut rng = RandomStream::new(99);
    let mut pass = true;
    let mut detail = Vec::new();
    for (level, tol) in [(0.90, 0.07), (0.95, 0.05), (0.99, 0.02)] {
        let intervals = hidden_population_intervals(&d, &y, level).expect("intervals");
        let report =
            coverage_report(&intervals, &sim.latent, level, 10_000, &mut rng).expect("coverage");
        let ok = (report.posterior_mean_coverage - level).abs() <= tol;
        pass &= ok;
        detail.push(format!(
            "{level}: {:.3} (±{tol})",
            report.posterior_mean_coverage
        ));
    }
    Outcome::new(
        "hidden-population coverage, N=100 T=10",
        pass,
        detail.join(", "),
    )
}

fn mape() -> Outcome {
    let sizes = [(7, 5), (7, 10), (10, 5), (10, 10), (14, 10)];
    let rows: Vec<(usize, usize, f64, f64)> = thread::scope(|scope| {
        let handles: Vec<_> = sizes
            .iter()
            .map(|&(side, t)| {
                scope.spawn(move || {
                    let sim = simulate(&grid(side, t, 1)).expect("simulate");
                    let d = fit(&sim, 1);
                    let m = mape_summary(
                        &d,
                        &sim.dataset.y_level(),
                        &sim.latent,
                        MapeVariant::PointEstimate,
                    )
                    .expect("mape");
                    (side * side, t, m.median, m.average)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let pass = rows
        .iter()
        .all(|&(_, _, med, avg)| med <= 0.15 && avg <= 0.35);
    let detail = rows
        .iter()
        .map(|(n, t, med, avg)| format!("{n}x{t} median {med:.3} avg {avg:.3}"))
        .collect::<Vec<_>>()
        .join("; ");
    Outcome::new(
        "MAPE median <= 0.15 and average <= 0.35 at every size",
        pass,
        detail,
    )
}

fn lambda_sweep() -> Outcome {
    let base = grid(7, 5, 1);
    let (low, high) = thread::scope(|scope| {
        let run = |lambda: f64| {
            let sim = simulate(&make_lambda_scenario(lambda, &base).expect("scenario"))
                .expect("simulate");
            fit(&sim, 1)
        };
        let a = scope.spawn(move || run(0.1));
        let b = scope.spawn(move || run(10.0));
        (a.join().unwrap(), b.join().unwrap())
    });
    let b1 = posterior_mean(&high, |s| s.beta[0]);
    let (alo, ahi) = hdi(&low.series(|s| s.sigma2_alpha.sqrt()), 0.95).expect("hdi");
    Outcome::new(
        "lambda=10 keeps beta1 within 0.06 of truth",
        (b1 - BETA_TRUE[0]).abs() <= 0.06,
        format!(
            "beta1 mean {b1:.3}; lambda=0.1 sigma_alpha HDI ({alo:.3}, {ahi:.3}) reported only"
        ),
    )
}

fn heavy_tails() -> Outcome {
    let config = DgpConfig {
        eps_law: EpsLaw::StudentT(4.0),
        ..grid(7, 5, 1)
    };
    let d = fit(&simulate(&config).expect("simulate"), 1);
    let mut pass = true;
    let mut detail = Vec::new();
    for (k, truth) in BETA_TRUE.iter().enumerate() {
        let (lo, hi) = beta_hdi(&d, k);
        pass &= lo <= *truth && *truth <= hi;
        detail.push(format!("beta{} ({lo:.3}, {hi:.3})", k + 1));
    }
    Outcome::new(
        "t(4) errors: beta HDIs contain truth, N=49 T=5",
        pass,
        detail.join(", "),
    )
}

fn oracles() -> Outcome {
    let mut failures = Vec::new();
    let mut check = |name: &str, ok: bool| {
        if !ok {
            failures.push(name.to_string());
        }
    };
    let mut rng = RandomStream::new(2024);

    // rank-one inverse against a dense inverse
    let mut worst = 0.0f64;
    for t in 1..=20 {
        for &(s2e, s2a) in &[(0.01, 0.0), (0.3, 0.7), (2.0, 0.05), (0.05, 4.0)] {
            let cov = CompoundSymmetricCov::new(s2e, s2a, t).unwrap();
            let (inv, _) = sigma_inverse(&cov);
            let dense = cov.dense().lu().try_inverse().unwrap();
            worst = worst.max((inv - dense).amax());
        }
    }
    check("rank-one inverse", worst < 1e-10);

    // conditional normal against the Schur complement
    let mut worst = 0.0f64;
    for trial in 0..500 {
        let d = 2 + trial % 7;
        let cov = random_spd(d, 0.5, &mut rng);
        let mu: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let index = rng.random_range(0..d);
        let others: Vec<f64> = (0..d - 1).map(|_| rng.sample(StandardNormal)).collect();
        let rest: Vec<usize> = (0..d).filter(|&j| j != index).collect();
        let s22 = DMatrix::from_fn(d - 1, d - 1, |a, b| cov[(rest[a], rest[b])]);
        let s12 = DVector::from_fn(d - 1, |a, _| cov[(index, rest[a])]);
        let dev = DVector::from_fn(d - 1, |a, _| others[a] - mu[rest[a]]);
        let w = s22.try_inverse().unwrap() * &s12;
        let (m0, v0) = (mu[index] + w.dot(&dev), cov[(index, index)] - w.dot(&s12));
        let (m, v) = conditional_mvn(&mu, &cov, index, &others).unwrap();
        worst = worst.max((m - m0).abs()).max((v - v0).abs());
    }
    check("conditional normal", worst < 1e-9);

    // standard half-normal moments
    let spec = TruncatedNormalSpec::positive(0.0, 1.0).unwrap();
    let draws: Vec<f64> = (0..400_000)
        .map(|_| sample_truncated_normal(&spec, &mut rng).unwrap())
        .collect();
    let pi = std::f64::consts::PI;
    check(
        "half-normal moments",
        (mean(&draws) - (2.0 / pi).sqrt()).abs() < 0.01
            && (variance(&draws) - (1.0 - 2.0 / pi)).abs() < 0.01,
    );

    // coefficient-only chain against its Gaussian conditional
    let data = random_panel(8, 5, 2, &mut rng);
    let graph = build_queen_grid(2, 4).unwrap();
    let prior = PriorConfig::default();
    let state = ParameterState::initial(&data, &prior);
    let (m_true, c_true) = beta_conditional(&state, &data, &prior).unwrap();
    let config = ChainConfig {
        n_iter: 40_001,
        burn_in: 1,
        thin: 1,
        updates: UpdateMask {
            beta: true,
            ..UpdateMask::NONE
        },
        ..ChainConfig::default()
    };
    let chain = run_chain_from(&data, &graph, &prior, &config, state, &mut rng).unwrap();
    let conjugate_ok = (0..2).all(|a| {
        let series = chain.series(|s| s.beta[a]);
        let se = (c_true[(a, a)] / series.len() as f64).sqrt();
        (mean(&series) - m_true[a]).abs() < 4.0 * se
            && (variance(&series) / c_true[(a, a)] - 1.0).abs() < 0.05
    });
    check("conjugate coefficient chain", conjugate_ok);

    // pairwise CAR energy against the dense Laplacian form
    let g = build_queen_grid(5, 6).unwrap();
    let n = 30;
    let mut lap = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for &j in g.neighbors(i) {
            lap[(i, j)] -= 1.0;
            lap[(i, i)] += 1.0;
        }
    }
    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let dv = DVector::from_column_slice(&v);
    let dense = dv.dot(&(&lap * &dv));
    let pairwise: f64 = (0..n)
        .flat_map(|i| {
            g.neighbors(i)
                .iter()
                .filter(move |&&j| j > i)
                .map(move |&j| (i, j))
        })
        .map(|(i, j)| (v[i] - v[j]).powi(2))
        .sum();
    let energy = g.car_quadratic_form(&v).unwrap();
    check(
        "CAR quadratic form",
        (pairwise - dense).abs() < 1e-10 * dense && (energy - dense).abs() < 1e-10 * dense,
    );

    // gamma-Poisson exceedance against quadrature
    let quad = |shape: f64, rate: f64| {
        let log_norm = shape * rate.ln() - ln_gamma(shape);
        let density = |x: f64| (log_norm + (shape - 1.0) * x.ln() - rate * x).exp();
        adaptive_simpson(
            &density,
            1.0,
            1.0 + 40.0 * shape.sqrt() / rate + 40.0 / rate,
            1e-13,
        )
    };
    let exceedance_ok = [
        (30u64, 20.0, 0.01, 0.01),
        (20, 20.0, 0.01, 0.01),
        (3, 7.5, 0.5, 0.2),
        (120, 100.0, 0.5, 0.2),
    ]
    .iter()
    .all(|&(s, e, nu, alpha)| {
        let p = exceedance_probability(s, e, nu, alpha).unwrap();
        (p - quad(s as f64 + nu, e + alpha)).abs() < 1e-8
    });
    check("exceedance probability", exceedance_ok);

    // Beta posterior mean identity
    let report = beta_binomial_coverage(245, 245, 0.95, 200_000, &mut rng).unwrap();
    check(
        "Beta mean identity",
        (report.posterior_mean_coverage - 246.0 / 247.0).abs() < 1e-3
            && report.a == 246.0
            && report.b == 1.0,
    );

    let pass = failures.is_empty();
    let detail = if pass {
        "7 oracle families agree".to_string()
    } else {
        format!("failed: {}", failures.join(", "))
    };
    Outcome::new("oracle suites", pass, detail)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let sim = simulate(&grid(7, 5, 1)).expect("simulate");
    let files: Vec<Vec<u8>> = (0..2)
        .map(|k| {
            let path = dir.path().join(format!("draws{k}.bin"));
            fit(&sim, 1).write_binary(&path).expect("write");
            std::fs::read(&path).expect("read")
        })
        .collect();
    Outcome::new(
        "identical seeds give identical draws files",
        files[0] == files[1] && !files[0].is_empty(),
        format!("{} bytes", files[0].len()),
    )
}

fn main() -> ExitCode {
    let start = Instant::now();
    let criteria: [fn() -> Outcome; 8] = [
        recovery_small_panel,
        shrinkage,
        coverage,
        mape,
        lambda_sweep,
        heavy_tails,
        oracles,
        determinism,
    ];
    let outcomes: Vec<Outcome> = thread::scope(|scope| {
        let handles: Vec<_> = criteria.iter().map(|c| scope.spawn(c)).collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });

    let mut failed = 0;
    for (k, o) in outcomes.iter().enumerate() {
        failed += !o.pass as usize;
        println!(
            "criterion {} {}: {} ({})",
            k + 1,
            o.label,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        outcomes.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
