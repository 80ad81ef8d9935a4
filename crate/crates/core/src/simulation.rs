//! Data-generating process for Monte Carlo studies.
//!
//! `y_it = β₁ z_it + β₂ Σ_j w_ij z_jt + α_i + v_i − η_i⁺ − u_it⁺ + ε_it` on a
//! queen-contiguity lattice, with `z_it ~ N(0, 1)`.

use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::kernels::truncated_normal_above;
use crate::panel::{fmt_full, PanelDataset};
use crate::rng::RandomStream;
use crate::spatial::{build_queen_grid, SpatialGraph};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsLaw {
    Normal,
    /// `ε = σ_ε · t_df`.
    StudentT(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct DgpConfig {
    pub rows: usize,
    pub cols: usize,
    pub periods: usize,
    /// Coefficients on `z` and on its spatial lag.
    pub beta_true: Vec<f64>,
    pub sigma_alpha: f64,
    pub sigma_eta: f64,
    pub sigma_u: f64,
    pub sigma_eps: f64,
    pub sigma_v: f64,
    pub eps_law: EpsLaw,
    pub seed: u64,
}

impl Default for DgpConfig {
    fn default() -> Self {
        Self {
            rows: 7,
            cols: 7,
            periods: 5,
            beta_true: vec![0.5, -0.5],
            sigma_alpha: 0.1,
            sigma_eta: 0.5,
            sigma_u: 0.2,
            sigma_eps: 0.1,
            sigma_v: 0.4,
            eps_law: EpsLaw::Normal,
            seed: 1,
        }
    }
}

impl DgpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rows * self.cols < 2 {
            return Err(Error::invalid("grid needs at least two cells"));
        }
        if self.periods == 0 {
            return Err(Error::invalid("at least one period is required"));
        }
        if self.beta_true.len() != 2 {
            return Err(Error::invalid(format!(
                "beta_true needs two coefficients (z and its lag), got {}",
                self.beta_true.len()
            )));
        }
        for (name, s) in [
            ("sigma_alpha", self.sigma_alpha),
            ("sigma_eta", self.sigma_eta),
            ("sigma_u", self.sigma_u),
            ("sigma_eps", self.sigma_eps),
            ("sigma_v", self.sigma_v),
        ] {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {s}")));
            }
        }
        if let EpsLaw::StudentT(df) = self.eps_law {
            if !(df > 2.0) {
                return Err(Error::invalid(format!(
                    "Student-t df must exceed 2, got {df}"
                )));
            }
        }
        Ok(())
    }
}

/// `λ = (σ_η + σ_u) / σ_ε`.
pub fn lambda_of(config: &DgpConfig) -> f64 {
    (config.sigma_eta + config.sigma_u) / config.sigma_eps
}

/// Copy of `base` with σ_ε chosen so that `lambda_of` returns `target_lambda`.
pub fn make_lambda_scenario(target_lambda: f64, base: &DgpConfig) -> Result<DgpConfig> {
    if !(target_lambda > 0.0 && target_lambda.is_finite()) {
        return Err(Error::invalid(format!(
            "lambda must be positive, got {target_lambda}"
        )));
    }
    Ok(DgpConfig {
        sigma_eps: (base.sigma_eta + base.sigma_u) / target_lambda,
        ..base.clone()
    })
}

/// Latent components behind a simulated panel, region-major.
#[derive(Clone, Debug, PartialEq)]
pub struct LatentTruth {
    pub n_regions: usize,
    pub n_periods: usize,
    pub u_plus: Vec<f64>,
    pub eta_plus: Vec<f64>,
    pub v: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Hidden population on the level scale, `Y · exp(η⁺ + u⁺)`.
    pub p: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SimulatedTruth {
    pub dataset: PanelDataset,
    pub graph: SpatialGraph,
    pub latent: LatentTruth,
    pub eps: Vec<f64>,
}

pub fn simulate(config: &DgpConfig) -> Result<SimulatedTruth> {
    config.validate()?;
    let graph = build_queen_grid(config.rows, config.cols)?;
    let n = graph.n_regions();
    let t = config.periods;
    let mut rng = RandomStream::new(config.seed);

    let z: Vec<f64> = (0..n * t).map(|_| rng.sample(StandardNormal)).collect();
    let lag: Vec<f64> = (0..n * t)
        .map(|c| {
            let (i, s) = (c / t, c % t);
            graph
                .neighbors(i)
                .iter()
                .zip(graph.weights(i))
                .map(|(&j, &w)| w * z[j * t + s])
                .sum()
        })
        .collect();
    let alpha: Vec<f64> = (0..n)
        .map(|_| config.sigma_alpha * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let eta_plus: Vec<f64> = (0..n)
        .map(|_| truncated_normal_above(0.0, config.sigma_eta, 0.0, &mut rng))
        .collect();
    let u_plus: Vec<f64> = (0..n * t)
        .map(|_| truncated_normal_above(0.0, config.sigma_u, 0.0, &mut rng))
        .collect();
    let eps: Vec<f64> = match config.eps_law {
        EpsLaw::Normal => (0..n * t)
            .map(|_| config.sigma_eps * rng.sample::<f64, _>(StandardNormal))
            .collect(),
        EpsLaw::StudentT(df) => {
            let st = StudentT::new(df).map_err(|e| Error::invalid(format!("student-t: {e}")))?;
            (0..n * t)
                .map(|_| config.sigma_eps * st.sample(&mut rng))
                .collect()
        }
    };
    let v = sample_intrinsic_car(&graph, config.sigma_v, &mut rng)?;

    let (b1, b2) = (config.beta_true[0], config.beta_true[1]);
    let mut y = vec![0.0; n * t];
    let mut x = vec![0.0; n * t * 2];
    let mut p = vec![0.0; n * t];
    for c in 0..n * t {
        let i = c / t;
        x[2 * c] = z[c];
        x[2 * c + 1] = lag[c];
        let log_p = b1 * z[c] + b2 * lag[c] + alpha[i] + v[i] + eps[c];
        y[c] = log_p - eta_plus[i] - u_plus[c];
        p[c] = y[c].exp() * (eta_plus[i] + u_plus[c]).exp();
    }
    let dataset = PanelDataset::new(n, t, 2, y, x)?;
    Ok(SimulatedTruth {
        dataset,
        graph,
        latent: LatentTruth {
            n_regions: n,
            n_periods: t,
            u_plus,
            eta_plus,
            v,
            alpha,
            p,
        },
        eps,
    })
}

/// Draws the intrinsic CAR field with precision `(D_w − W)/σ²_v` restricted
/// to the complement of the null space of `D_w − W` (the constant vector for
/// a connected graph).
pub fn sample_intrinsic_car<R: Rng + ?Sized>(
    graph: &SpatialGraph,
    sigma_v: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = graph.n_regions();
    let eig = graph.dense_precision().symmetric_eigen();
    let max = eig.eigenvalues.iter().fold(0.0_f64, |m, &l| m.max(l));
    let tol = max * 1e-10;
    let mut v = vec![0.0; n];
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= tol {
            continue;
        }
        let coef = sigma_v * rng.sample::<f64, _>(StandardNormal) / lambda.sqrt();
        for (vi, e) in v.iter_mut().zip(eig.eigenvectors.column(k).iter()) {
            *vi += coef * e;
        }
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    if n_components(graph) == 1 {
        v.iter_mut().for_each(|x| *x -= mean);
    }
    Ok(v)
}

fn n_components(graph: &SpatialGraph) -> usize {
    let n = graph.n_regions();
    let mut seen = vec![false; n];
    let mut count = 0;
    for start in 0..n {
        if seen[start] {
            continue;
        }
        count += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(i) = stack.pop() {
            for &j in graph.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    count
}

impl LatentTruth {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["region", "time", "u_plus", "eta_plus", "v", "alpha", "P"])?;
        let t = self.n_periods;
        for c in 0..self.n_regions * t {
            let i = c / t;
            w.write_record([
                i.to_string(),
                (c % t).to_string(),
                fmt_full(self.u_plus[c]),
                fmt_full(self.eta_plus[i]),
                fmt_full(self.v[i]),
                fmt_full(self.alpha[i]),
                fmt_full(self.p[c]),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)?;
        let expected = ["region", "time", "u_plus", "eta_plus", "v", "alpha", "P"];
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Format {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected header `{}`", expected.join(",")),
            });
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |m: String| Error::Format {
                path: path.to_path_buf(),
                line: k + 2,
                message: m,
            };
            let i: usize = rec[0]
                .parse()
                .map_err(|_| bad(format!("bad region `{}`", &rec[0])))?;
            let s: usize = rec[1]
                .parse()
                .map_err(|_| bad(format!("bad time `{}`", &rec[1])))?;
            let mut vals = [0.0; 5];
            for (slot, f) in vals.iter_mut().zip(rec.iter().skip(2)) {
                *slot = f.parse().map_err(|_| bad(format!("bad number `{f}`")))?;
            }
            rows.push((i, s, vals));
        }
        if rows.is_empty() {
            return Err(Error::validation(format!(
                "{}: truth file is empty",
                path.display()
            )));
        }
        let n = rows.iter().map(|r| r.0).max().unwrap() + 1;
        let t = rows.iter().map(|r| r.1).max().unwrap() + 1;
        if rows.len() != n * t {
            return Err(Error::validation(format!(
                "{}: {} rows for {n} regions × {t} periods",
                path.display(),
                rows.len()
            )));
        }
        let mut out = LatentTruth {
            n_regions: n,
            n_periods: t,
            u_plus: vec![0.0; n * t],
            eta_plus: vec![0.0; n],
            v: vec![0.0; n],
            alpha: vec![0.0; n],
            p: vec![0.0; n * t],
        };
        for (i, s, vals) in rows {
            let c = i * t + s;
            out.u_plus[c] = vals[0];
            out.eta_plus[i] = vals[1];
            out.v[i] = vals[2];
            out.alpha[i] = vals[3];
            out.p[c] = vals[4];
        }
        Ok(out)
    }
}
