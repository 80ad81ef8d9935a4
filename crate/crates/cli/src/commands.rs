use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use hiddenpop::analysis::{
    coverage_report, group_uncaptured, hidden_population_intervals, latent_summary, mape_summary,
    parameter_summaries, uncaptured_by_cell, uncaptured_summaries, Grouping, Latent, MapeVariant,
    MIN_HDI_DRAWS,
};
use hiddenpop::gibbs::{run_chains, CarDf, ChainConfig, PriorConfig};
use hiddenpop::report;
use hiddenpop::simulation::{
    lambda_of, make_lambda_scenario, simulate as run_dgp, DgpConfig, EpsLaw, LatentTruth,
};
use hiddenpop::sir::{compute_sir, flag_hotspots, CountPanel, Thresholds, DEFAULT_PRIOR};
use hiddenpop::spatial::{
    build_queen_grid, load_adjacency, parse_grid_spec, write_adjacency, SpatialGraph,
};
use hiddenpop::{PanelDataset, PosteriorDraws, RandomStream};

use crate::config::{self, parse_levels};
use crate::output::{default_out_dir, Manifest, OutputDir};
use crate::{AnalyzeArgs, FitArgs, SimulateArgs, SirArgs};

/// Invalid flag combination; reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn manifest<C: Serialize>(
    subcommand: &'static str,
    seed: Option<u64>,
    config: C,
    inputs: BTreeMap<String, String>,
    out: &OutputDir,
    results: serde_json::Value,
    started: Instant,
) -> Manifest<C> {
    Manifest {
        tool: "hiddenpop",
        version: env!("CARGO_PKG_VERSION"),
        subcommand,
        seed,
        config,
        inputs,
        outputs: out.file_names(),
        results,
        duration_secs: started.elapsed().as_secs_f64(),
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SimulateFile {
    grid: Option<String>,
    periods: Option<usize>,
    seed: Option<u64>,
    lambda: Option<f64>,
    student_t_df: Option<f64>,
    beta: Option<Vec<f64>>,
    sigma_alpha: Option<f64>,
    sigma_eta: Option<f64>,
    sigma_u: Option<f64>,
    sigma_eps: Option<f64>,
    sigma_v: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SimulateResolved {
    grid: String,
    periods: usize,
    seed: u64,
    lambda: Option<f64>,
    student_t_df: Option<f64>,
    beta: Vec<f64>,
    sigma_alpha: f64,
    sigma_eta: f64,
    sigma_u: f64,
    sigma_eps: f64,
    sigma_v: f64,
}

pub fn simulate(args: SimulateArgs) -> Result<PathBuf> {
    let started = Instant::now();
    let file: SimulateFile = config::load(args.common.config.as_deref())?;
    let base = DgpConfig::default();
    let grid = args.grid.or(file.grid).unwrap_or_else(|| "7x7".into());
    let (rows, cols) = parse_grid_spec(&grid).map_err(|e| usage(e.to_string()))?;
    let lambda = args.lambda.or(file.lambda);
    let explicit_eps = args.sigma_eps.or(if args.lambda.is_some() {
        None
    } else {
        file.sigma_eps
    });
    let student_t_df = args.student_t_df.or(file.student_t_df);
    let mut dgp = DgpConfig {
        rows,
        cols,
        periods: args.periods.or(file.periods).unwrap_or(base.periods),
        beta_true: args.beta.or(file.beta).unwrap_or(base.beta_true.clone()),
        sigma_alpha: args
            .sigma_alpha
            .or(file.sigma_alpha)
            .unwrap_or(base.sigma_alpha),
        sigma_eta: args.sigma_eta.or(file.sigma_eta).unwrap_or(base.sigma_eta),
        sigma_u: args.sigma_u.or(file.sigma_u).unwrap_or(base.sigma_u),
        sigma_eps: explicit_eps.unwrap_or(base.sigma_eps),
        sigma_v: args.sigma_v.or(file.sigma_v).unwrap_or(base.sigma_v),
        eps_law: student_t_df.map_or(EpsLaw::Normal, EpsLaw::StudentT),
        seed: args.seed.or(file.seed).unwrap_or(base.seed),
    };
    if let Some(l) = lambda {
        let derived = make_lambda_scenario(l, &dgp).map_err(|e| usage(e.to_string()))?;
        if let Some(e) = explicit_eps {
            if (e - derived.sigma_eps).abs() > 1e-12 * e.abs().max(1.0) {
                return Err(usage(format!(
                    "sigma_eps = {e} contradicts lambda = {l} (which implies {})",
                    derived.sigma_eps
                )));
            }
        }
        dgp = derived;
    }
    dgp.validate().map_err(|e| usage(e.to_string()))?;

    let sim = run_dgp(&dgp)?;
    let mut out = OutputDir::create(
        args.common
            .out
            .unwrap_or_else(|| default_out_dir("simulate")),
    )?;
    sim.dataset.write_csv(out.file("panel.csv"))?;
    sim.latent.write_csv(out.file("truth.csv"))?;
    write_adjacency(&sim.graph, out.file("adjacency.txt"))?;

    let results = json!({
        "lambda": lambda_of(&dgp),
        "n_regions": sim.dataset.n_regions(),
        "n_periods": sim.dataset.n_periods(),
        "rows": sim.dataset.n_cells(),
    });
    let resolved = SimulateResolved {
        grid: format!("{rows}x{cols}"),
        periods: dgp.periods,
        seed: dgp.seed,
        lambda,
        student_t_df,
        beta: dgp.beta_true.clone(),
        sigma_alpha: dgp.sigma_alpha,
        sigma_eta: dgp.sigma_eta,
        sigma_u: dgp.sigma_u,
        sigma_eps: dgp.sigma_eps,
        sigma_v: dgp.sigma_v,
    };
    let m = manifest(
        "simulate",
        Some(dgp.seed),
        resolved,
        BTreeMap::new(),
        &out,
        results,
        started,
    );
    out.commit(&m)
}

// --------------------------------------------------------------------- fit

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct PriorFile {
    beta_mean: Option<Vec<f64>>,
    beta_cov_scale: Option<f64>,
    qbar_eps: Option<f64>,
    qbar_alpha: Option<f64>,
    qbar_v: Option<f64>,
    nbar_eps: Option<f64>,
    nbar_alpha: Option<f64>,
    nbar_v: Option<f64>,
    v0_u: Option<f64>,
    v0_eta: Option<f64>,
    r_star_u: Option<f64>,
    r_star_eta: Option<f64>,
}

#[derive(Debug, Serialize)]
struct PriorResolved {
    beta_mean: Vec<f64>,
    beta_cov_scale: f64,
    qbar_eps: f64,
    qbar_alpha: f64,
    qbar_v: f64,
    nbar_eps: f64,
    nbar_alpha: f64,
    nbar_v: f64,
    v0_u: f64,
    v0_eta: f64,
    r_star_u: f64,
    r_star_eta: f64,
}

impl PriorFile {
    fn resolve(self) -> PriorConfig {
        let d = PriorConfig::default();
        PriorConfig {
            beta_mean: self.beta_mean.unwrap_or(d.beta_mean),
            beta_cov_scale: self.beta_cov_scale.unwrap_or(d.beta_cov_scale),
            qbar_eps: self.qbar_eps.unwrap_or(d.qbar_eps),
            qbar_alpha: self.qbar_alpha.unwrap_or(d.qbar_alpha),
            qbar_v: self.qbar_v.unwrap_or(d.qbar_v),
            nbar_eps: self.nbar_eps.unwrap_or(d.nbar_eps),
            nbar_alpha: self.nbar_alpha.unwrap_or(d.nbar_alpha),
            nbar_v: self.nbar_v.unwrap_or(d.nbar_v),
            v0_u: self.v0_u.unwrap_or(d.v0_u),
            v0_eta: self.v0_eta.unwrap_or(d.v0_eta),
            r_star_u: self.r_star_u.unwrap_or(d.r_star_u),
            r_star_eta: self.r_star_eta.unwrap_or(d.r_star_eta),
        }
    }
}

impl From<&PriorConfig> for PriorResolved {
    fn from(p: &PriorConfig) -> Self {
        Self {
            beta_mean: p.beta_mean.clone(),
            beta_cov_scale: p.beta_cov_scale,
            qbar_eps: p.qbar_eps,
            qbar_alpha: p.qbar_alpha,
            qbar_v: p.qbar_v,
            nbar_eps: p.nbar_eps,
            nbar_alpha: p.nbar_alpha,
            nbar_v: p.nbar_v,
            v0_u: p.v0_u,
            v0_eta: p.v0_eta,
            r_star_u: p.r_star_u,
            r_star_eta: p.r_star_eta,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FitFile {
    data: Option<PathBuf>,
    adjacency: Option<PathBuf>,
    grid: Option<String>,
    iters: Option<usize>,
    burnin: Option<usize>,
    thin: Option<usize>,
    seed: Option<u64>,
    chains: Option<usize>,
    center_car: Option<bool>,
    car_df: Option<String>,
    draws_csv: Option<bool>,
    level: Option<f64>,
    mh_step_alpha: Option<f64>,
    mh_step_eps: Option<f64>,
    prior: Option<PriorFile>,
}

#[derive(Debug, Serialize)]
struct FitResolved {
    data: PathBuf,
    adjacency: Option<PathBuf>,
    grid: Option<String>,
    iters: usize,
    burnin: usize,
    thin: usize,
    seed: u64,
    chains: usize,
    center_car: bool,
    car_df: String,
    draws_csv: bool,
    level: f64,
    mh_step_alpha: f64,
    mh_step_eps: f64,
    prior: PriorResolved,
}

/// Graph from exactly one of `--adjacency` / `--grid`.
fn graph_from(
    adjacency: Option<&Path>,
    grid: Option<&str>,
    n_regions: Option<usize>,
) -> Result<Option<SpatialGraph>> {
    match (adjacency, grid) {
        (Some(_), Some(_)) => Err(usage("give either --adjacency or --grid, not both")),
        (Some(p), None) => Ok(Some(load_adjacency(p, n_regions)?)),
        (None, Some(g)) => {
            let (r, c) = parse_grid_spec(g).map_err(|e| usage(e.to_string()))?;
            Ok(Some(build_queen_grid(r, c)?))
        }
        (None, None) => Ok(None),
    }
}

pub fn fit(args: FitArgs) -> Result<PathBuf> {
    let started = Instant::now();
    let file: FitFile = config::load(args.common.config.as_deref())?;
    let defaults = ChainConfig::default();
    let data_path = args
        .data
        .or(file.data)
        .ok_or_else(|| usage("--data is required"))?;
    // a flag on the command line replaces the graph source from the file
    let (adjacency, grid) = if args.adjacency.is_some() || args.grid.is_some() {
        (args.adjacency, args.grid)
    } else {
        (file.adjacency, file.grid)
    };
    let car_df: CarDf = match args.car_df.or(file.car_df) {
        Some(s) => s
            .parse()
            .map_err(|e: hiddenpop::Error| usage(e.to_string()))?,
        None => defaults.car_df,
    };
    let chain = ChainConfig {
        n_iter: args.iters.or(file.iters).unwrap_or(defaults.n_iter),
        burn_in: args.burnin.or(file.burnin).unwrap_or(defaults.burn_in),
        thin: args.thin.or(file.thin).unwrap_or(defaults.thin),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        mh_step_scale_alpha: args
            .mh_step_alpha
            .or(file.mh_step_alpha)
            .unwrap_or(defaults.mh_step_scale_alpha),
        mh_step_scale_eps: args
            .mh_step_eps
            .or(file.mh_step_eps)
            .unwrap_or(defaults.mh_step_scale_eps),
        center_car: args.center_car || file.center_car.unwrap_or(defaults.center_car),
        car_df,
        ..defaults
    };
    chain.validate().map_err(|e| usage(e.to_string()))?;
    let chains = args.chains.or(file.chains).unwrap_or(1);
    if chains == 0 {
        return Err(usage("--chains must be at least 1"));
    }
    let level = args.level.or(file.level).unwrap_or(0.95);
    if !(level > 0.0 && level < 1.0) {
        return Err(usage(format!("--level must lie in (0, 1), got {level}")));
    }
    let draws_csv = args.draws_csv || file.draws_csv.unwrap_or(false);
    let prior = file.prior.unwrap_or_default().resolve();

    let data = PanelDataset::read_csv(&data_path)?;
    let graph = graph_from(
        adjacency.as_deref(),
        grid.as_deref(),
        Some(data.n_regions()),
    )?
    .ok_or_else(|| usage("one of --adjacency or --grid is required"))?;
    prior.validate(data.k_regressors())?;

    let draws = run_chains(&data, &graph, &prior, &chain, chains)?;

    let mut out = OutputDir::create(args.common.out.unwrap_or_else(|| default_out_dir("fit")))?;
    draws.write_binary(out.file("draws.bin"))?;
    if draws_csv {
        draws.write_csv(out.file("draws.csv"))?;
    }
    report::write_acceptance_csv(out.file("acceptance.csv"), &draws.chain_stats)?;
    let mut summary_json = serde_json::Value::Null;
    if draws.len() >= MIN_HDI_DRAWS {
        let rows = parameter_summaries(&draws, level)?;
        report::write_summary_csv(out.file("summary.csv"), &rows, level)?;
        summary_json = rows
            .iter()
            .map(|r| {
                (
                    r.name.clone(),
                    json!({"mean": r.mean, "hdi": [r.hdi_lower, r.hdi_upper]}),
                )
            })
            .collect::<serde_json::Map<_, _>>()
            .into();
    } else {
        eprintln!(
            "note: {} stored draws (< {MIN_HDI_DRAWS}); summary.csv not written",
            draws.len()
        );
    }

    let results = json!({
        "stored_draws": draws.len(),
        "acceptance": draws.chain_stats.iter().map(|s| json!({
            "alpha": s.acceptance_alpha(),
            "eps": s.acceptance_eps(),
            "floored": s.floored,
        })).collect::<Vec<_>>(),
        "summary": summary_json,
    });
    let mut inputs = BTreeMap::new();
    inputs.insert("data".into(), path_str(&data_path));
    if let Some(a) = &adjacency {
        inputs.insert("adjacency".into(), path_str(a));
    }
    let resolved = FitResolved {
        data: data_path,
        adjacency,
        grid,
        iters: chain.n_iter,
        burnin: chain.burn_in,
        thin: chain.thin,
        seed: chain.seed,
        chains,
        center_car: chain.center_car,
        car_df: chain.car_df.to_string(),
        draws_csv,
        level,
        mh_step_alpha: chain.mh_step_scale_alpha,
        mh_step_eps: chain.mh_step_scale_eps,
        prior: PriorResolved::from(&prior),
    };
    let m = manifest(
        "fit",
        Some(chain.seed),
        resolved,
        inputs,
        &out,
        results,
        started,
    );
    out.commit(&m)
}

// ----------------------------------------------------------------- analyze

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AnalyzeFile {
    draws: Option<PathBuf>,
    data: Option<PathBuf>,
    truth: Option<PathBuf>,
    levels: Option<Vec<f64>>,
    by_region: Option<bool>,
    by_period: Option<bool>,
    per_draw_mape: Option<bool>,
    adjacency: Option<PathBuf>,
    grid: Option<String>,
    seed: Option<u64>,
    beta_draws: Option<usize>,
}

#[derive(Debug, Serialize)]
struct AnalyzeResolved {
    draws: PathBuf,
    data: Option<PathBuf>,
    truth: Option<PathBuf>,
    levels: Option<Vec<f64>>,
    by_region: bool,
    by_period: bool,
    per_draw_mape: bool,
    adjacency: Option<PathBuf>,
    grid: Option<String>,
    seed: u64,
    beta_draws: usize,
}

const DEFAULT_LEVELS: [f64; 3] = [0.90, 0.95, 0.99];

pub fn analyze(args: AnalyzeArgs) -> Result<PathBuf> {
    let started = Instant::now();
    let file: AnalyzeFile = config::load(args.common.config.as_deref())?;
    let draws_path = args
        .draws
        .or(file.draws)
        .ok_or_else(|| usage("--draws is required"))?;
    let data_path = args.data.or(file.data);
    let truth_path = args.truth.or(file.truth);
    let explicit_levels = match args.levels {
        Some(s) => Some(parse_levels(&s).map_err(|e| usage(e.to_string()))?),
        None => file.levels,
    };
    if explicit_levels.is_some() && truth_path.is_none() {
        return Err(usage("coverage levels need --truth"));
    }
    let grouping = Grouping {
        by_region: args.by_region || file.by_region.unwrap_or(false),
        by_period: args.by_period || file.by_period.unwrap_or(false),
    };
    let per_draw = args.per_draw_mape || file.per_draw_mape.unwrap_or(false);
    let (adjacency, grid) = if args.adjacency.is_some() || args.grid.is_some() {
        (args.adjacency, args.grid)
    } else {
        (file.adjacency, file.grid)
    };
    let seed = args.seed.or(file.seed).unwrap_or(1);
    let beta_draws = args.beta_draws.or(file.beta_draws).unwrap_or(10_000);
    if beta_draws < MIN_HDI_DRAWS {
        return Err(usage(format!(
            "--beta-draws must be at least {MIN_HDI_DRAWS}"
        )));
    }

    let draws = PosteriorDraws::read_binary(&draws_path)?;
    let graph = graph_from(adjacency.as_deref(), grid.as_deref(), Some(draws.n_regions))?;
    if let Some(g) = &graph {
        if g.n_regions() != draws.n_regions {
            return Err(hiddenpop::Error::Validation(format!(
                "graph has {} regions, draws have {}",
                g.n_regions(),
                draws.n_regions
            ))
            .into());
        }
    }
    let dims = (draws.n_regions, draws.n_periods);
    let truth = match &truth_path {
        Some(p) => {
            let t = LatentTruth::read_csv(p)?;
            if (t.n_regions, t.n_periods) != dims {
                return Err(hiddenpop::Error::Validation(format!(
                    "truth is {}×{}, draws are {}×{}",
                    t.n_regions, t.n_periods, dims.0, dims.1
                ))
                .into());
            }
            Some(t)
        }
        None => None,
    };
    let y_level = match (&data_path, &truth) {
        (Some(p), _) => {
            let d = PanelDataset::read_csv(p)?;
            if (d.n_regions(), d.n_periods()) != dims {
                return Err(hiddenpop::Error::Validation(format!(
                    "panel is {}×{}, draws are {}×{}",
                    d.n_regions(),
                    d.n_periods(),
                    dims.0,
                    dims.1
                ))
                .into());
            }
            Some(d.y_level())
        }
        // Y = P·exp(−η⁺ − u⁺) is recoverable from the truth sidecar
        (None, Some(t)) => Some(
            (0..t.p.len())
                .map(|c| t.p[c] * (-(t.eta_plus[c / t.n_periods] + t.u_plus[c])).exp())
                .collect(),
        ),
        (None, None) => None,
    };

    let mut out = OutputDir::create(
        args.common
            .out
            .unwrap_or_else(|| default_out_dir("analyze")),
    )?;
    let cells = uncaptured_by_cell(&draws);
    report::write_uncaptured_csv(
        out.file("uncaptured.csv"),
        &group_uncaptured(&cells, grouping),
    )?;
    let overall = uncaptured_summaries(&draws, graph.as_ref().map(SpatialGraph::average_row_sum))?;
    let mut results = json!({
        "stored_draws": draws.len(),
        "permanent_pct": overall.permanent_pct,
        "total_pct": overall.total_pct,
        "lambda": overall.lambda_stat,
        "spatial_share": overall.spatial_share,
    });

    let levels = explicit_levels
        .clone()
        .unwrap_or_else(|| DEFAULT_LEVELS.to_vec());
    if let (Some(truth), Some(y)) = (&truth, &y_level) {
        let mut rng = RandomStream::new(seed);
        let mut reports = Vec::new();
        for &level in &levels {
            let intervals = hidden_population_intervals(&draws, y, level)?;
            reports.push(coverage_report(
                &intervals, truth, level, beta_draws, &mut rng,
            )?);
        }
        report::write_coverage_csv(out.file("coverage.csv"), &reports)?;
        let variant = if per_draw {
            MapeVariant::PerDraw
        } else {
            MapeVariant::PointEstimate
        };
        let mape = mape_summary(&draws, y, truth, variant)?;
        report::write_mape_csv(
            out.file("mape.csv"),
            &mape,
            if per_draw {
                "per_draw"
            } else {
                "point_estimate"
            },
        )?;
        let latent = Latent::ALL
            .iter()
            .map(|&c| latent_summary(&draws, c, Some(truth)))
            .collect::<hiddenpop::Result<Vec<_>>>()?;
        report::write_latent_csv(out.file("latent.csv"), &latent)?;
        results["coverage"] = reports
            .iter()
            .map(|r| json!({"level": r.nominal_level, "mean": r.posterior_mean_coverage, "hdi": [r.coverage_hdi.0, r.coverage_hdi.1]}))
            .collect::<Vec<_>>()
            .into();
        results["mape"] =
            json!({"average": mape.average, "median": mape.median, "excluded": mape.excluded});
    }

    let mut inputs = BTreeMap::new();
    inputs.insert("draws".into(), path_str(&draws_path));
    for (k, p) in [
        ("data", &data_path),
        ("truth", &truth_path),
        ("adjacency", &adjacency),
    ] {
        if let Some(p) = p {
            inputs.insert(k.into(), path_str(p));
        }
    }
    let resolved = AnalyzeResolved {
        draws: draws_path,
        data: data_path,
        truth: truth_path,
        levels: explicit_levels,
        by_region: grouping.by_region,
        by_period: grouping.by_period,
        per_draw_mape: per_draw,
        adjacency,
        grid,
        seed,
        beta_draws,
    };
    let m = manifest(
        "analyze",
        Some(seed),
        resolved,
        inputs,
        &out,
        results,
        started,
    );
    out.commit(&m)
}

// --------------------------------------------------------------------- sir

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SirFile {
    counts: Option<PathBuf>,
    thresholds: Option<Vec<f64>>,
    nu: Option<f64>,
    alpha: Option<f64>,
}

#[derive(Debug, Serialize)]
struct SirResolved {
    counts: PathBuf,
    thresholds: Vec<f64>,
    nu: f64,
    alpha: f64,
}

pub fn sir(args: SirArgs) -> Result<PathBuf> {
    let started = Instant::now();
    let file: SirFile = config::load(args.common.config.as_deref())?;
    let counts_path = args
        .counts
        .or(file.counts)
        .ok_or_else(|| usage("--counts is required"))?;
    let th = match args.thresholds {
        Some(s) => parse_levels(&s).map_err(|e| usage(e.to_string()))?,
        None => file.thresholds.unwrap_or_else(|| DEFAULT_LEVELS.to_vec()),
    };
    let [p90, p95, p99] = th[..] else {
        return Err(usage(format!(
            "expected three thresholds, got {}",
            th.len()
        )));
    };
    let thresholds = Thresholds { p90, p95, p99 };
    thresholds.validate().map_err(|e| usage(e.to_string()))?;
    let nu = args.nu.or(file.nu).unwrap_or(DEFAULT_PRIOR);
    let alpha = args.alpha.or(file.alpha).unwrap_or(DEFAULT_PRIOR);

    let panel = CountPanel::read_csv(&counts_path)?;
    let table = compute_sir(&panel)?.with_exceedance(&panel, nu, alpha)?;
    let tiers = flag_hotspots(&table, &thresholds)?;

    let mut out = OutputDir::create(args.common.out.unwrap_or_else(|| default_out_dir("sir")))?;
    table
        .write_csv(out.file("sir.csv"), &tiers)
        .with_context(|| "writing SIR table")?;
    let count = |t: hiddenpop::sir::Tier| tiers.iter().filter(|&&x| x == t).count();
    use hiddenpop::sir::Tier;
    let results = json!({
        "cells": tiers.len(),
        "tier_99": count(Tier::P99),
        "tier_95": count(Tier::P95),
        "tier_90": count(Tier::P90),
        "undefined_sir": table.sir.iter().filter(|s| s.is_none()).count(),
    });
    let mut inputs = BTreeMap::new();
    inputs.insert("counts".into(), path_str(&counts_path));
    let resolved = SirResolved {
        counts: counts_path,
        thresholds: th,
        nu,
        alpha,
    };
    let m = manifest("sir", None, resolved, inputs, &out, results, started);
    out.commit(&m)
}
