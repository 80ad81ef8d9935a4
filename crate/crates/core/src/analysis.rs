//! Summaries computed from stored posterior draws: HDIs, hidden-population
//! intervals, Beta-Binomial coverage, MAPE, correlation diagnostics and
//! uncaptured-share summaries.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::draws::PosteriorDraws;
use crate::error::{Error, Result};
use crate::gibbs::ParameterState;
use crate::simulation::LatentTruth;

/// Fewest draws accepted by [`hdi`].
pub const MIN_HDI_DRAWS: usize = 100;

/// Shortest contiguous window of the sorted draws holding `⌈level·S⌉ + 1`
/// points; among equally short windows the one with the smallest lower end
/// wins.
///
/// ```
/// let draws: Vec<f64> = (1..=100).map(f64::from).collect();
/// assert_eq!(hiddenpop::analysis::hdi(&draws, 0.9).unwrap(), (1.0, 91.0));
/// ```
pub fn hdi(draws: &[f64], level: f64) -> Result<(f64, f64)> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::invalid(format!(
            "HDI level must lie in (0, 1), got {level}"
        )));
    }
    if draws.len() < MIN_HDI_DRAWS {
        return Err(Error::validation(format!(
            "HDI needs at least {MIN_HDI_DRAWS} draws, got {}",
            draws.len()
        )));
    }
    if draws.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("HDI input contains non-finite draws"));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(hdi_sorted(&sorted, level))
}

fn hdi_sorted(sorted: &[f64], level: f64) -> (f64, f64) {
    let s = sorted.len();
    // the small offset keeps e.g. 0.9·100 from rounding up to 91
    let span = ((level * s as f64 - 1e-9).ceil() as usize).min(s - 1);
    let mut best = (0, f64::INFINITY);
    for lo in 0..s - span {
        let width = sorted[lo + span] - sorted[lo];
        if width < best.1 {
            best = (lo, width);
        }
    }
    (sorted[best.0], sorted[best.0 + span])
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

fn require_draws(draws: &PosteriorDraws) -> Result<()> {
    if draws.is_empty() {
        Err(Error::validation("no posterior draws"))
    } else {
        Ok(())
    }
}

/// Predictive interval for one hidden-population cell on the level scale.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HiddenPopulationInterval {
    pub region: usize,
    pub time: usize,
    /// Posterior mean of `Y · exp(η⁺ + u⁺)`.
    pub point_estimate: f64,
    pub hdi_lower: f64,
    pub hdi_upper: f64,
    pub level: f64,
}

impl HiddenPopulationInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.hdi_lower <= value && value <= self.hdi_upper
    }
}

/// Per-draw `Y_it · exp(η_i⁺ + u_it⁺)`.
pub fn hidden_population_draws(
    draws: &PosteriorDraws,
    y: f64,
    region: usize,
    time: usize,
) -> Vec<f64> {
    let c = region * draws.n_periods + time;
    draws.series(|s| y * (s.eta_plus[region] + s.u_plus[c]).exp())
}

/// `y_observed` holds the observed counts on the level scale, region-major.
pub fn hidden_population_interval(
    draws: &PosteriorDraws,
    y_observed: &[f64],
    region: usize,
    time: usize,
    level: f64,
) -> Result<HiddenPopulationInterval> {
    require_draws(draws)?;
    let (n, t) = (draws.n_regions, draws.n_periods);
    if y_observed.len() != n * t {
        return Err(Error::validation(format!(
            "observed panel has {} cells, draws describe {n}×{t}",
            y_observed.len()
        )));
    }
    if region >= n || time >= t {
        return Err(Error::invalid(format!(
            "cell ({region}, {time}) outside {n}×{t} panel"
        )));
    }
    let y = y_observed[region * t + time];
    if !(y >= 0.0 && y.is_finite()) {
        return Err(Error::invalid(format!(
            "observed value at ({region}, {time}) must be non-negative, got {y}"
        )));
    }
    let values = hidden_population_draws(draws, y, region, time);
    let (hdi_lower, hdi_upper) = hdi(&values, level)?;
    Ok(HiddenPopulationInterval {
        region,
        time,
        point_estimate: mean(&values),
        hdi_lower,
        hdi_upper,
        level,
    })
}

/// Intervals for every cell, region-major.
pub fn hidden_population_intervals(
    draws: &PosteriorDraws,
    y_observed: &[f64],
    level: f64,
) -> Result<Vec<HiddenPopulationInterval>> {
    let (n, t) = (draws.n_regions, draws.n_periods);
    (0..n * t)
        .map(|c| hidden_population_interval(draws, y_observed, c / t, c % t, level))
        .collect()
}

/// Beta-Binomial summary of how often the intervals cover the truth.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoverageReport {
    pub nominal_level: f64,
    pub hits: usize,
    pub cells: usize,
    pub posterior_mean_coverage: f64,
    /// 95% HDI of the Beta draws.
    pub coverage_hdi: (f64, f64),
    pub a: f64,
    pub b: f64,
}

/// With a uniform prior the coverage posterior is `Beta(1 + hits, 1 + cells − hits)`;
/// it is summarised by the mean and 95% HDI of `n_beta_draws` samples.
pub fn coverage_report<R: Rng + ?Sized>(
    intervals: &[HiddenPopulationInterval],
    truth: &LatentTruth,
    level: f64,
    n_beta_draws: usize,
    rng: &mut R,
) -> Result<CoverageReport> {
    let (n, t) = (truth.n_regions, truth.n_periods);
    if intervals.len() != n * t {
        return Err(Error::validation(format!(
            "{} intervals for a {n}×{t} truth panel",
            intervals.len()
        )));
    }
    let mut hits = 0;
    for iv in intervals {
        if iv.region >= n || iv.time >= t {
            return Err(Error::validation(format!(
                "interval cell ({}, {}) outside the truth panel",
                iv.region, iv.time
            )));
        }
        hits += iv.contains(truth.p[iv.region * t + iv.time]) as usize;
    }
    beta_binomial_coverage(hits, n * t, level, n_beta_draws, rng)
}

pub fn beta_binomial_coverage<R: Rng + ?Sized>(
    hits: usize,
    cells: usize,
    level: f64,
    n_beta_draws: usize,
    rng: &mut R,
) -> Result<CoverageReport> {
    if hits > cells {
        return Err(Error::invalid(format!("{hits} hits out of {cells} cells")));
    }
    let a = 1.0 + hits as f64;
    let b = 1.0 + (cells - hits) as f64;
    let beta = Beta::new(a, b).map_err(|e| Error::invalid(format!("beta({a}, {b}): {e}")))?;
    let samples: Vec<f64> = (0..n_beta_draws).map(|_| beta.sample(rng)).collect();
    Ok(CoverageReport {
        nominal_level: level,
        hits,
        cells,
        posterior_mean_coverage: mean(&samples),
        coverage_hdi: hdi(&samples, 0.95)?,
        a,
        b,
    })
}

/// How the per-cell absolute percentage error is formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MapeVariant {
    /// `|P − Ê[P]| / P`, with `Ê[P]` the posterior mean.
    #[default]
    PointEstimate,
    /// `(1/S) Σ_s |P − P⁽ˢ⁾| / P`.
    PerDraw,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MapeSummary {
    pub average: f64,
    pub median: f64,
    /// 95% HDI across cells; `None` when fewer than [`MIN_HDI_DRAWS`] cells
    /// are usable.
    pub hdi: Option<(f64, f64)>,
    pub cells: usize,
    /// Cells skipped because the true value is zero.
    pub excluded: usize,
}

/// Per-cell MAPE, region-major; `None` where the true value is zero.
pub fn mape_per_cell(
    draws: &PosteriorDraws,
    y_observed: &[f64],
    truth: &LatentTruth,
    variant: MapeVariant,
) -> Result<Vec<Option<f64>>> {
    require_draws(draws)?;
    let (n, t) = (draws.n_regions, draws.n_periods);
    if truth.p.len() != n * t || y_observed.len() != n * t {
        return Err(Error::validation(format!(
            "truth/observed panels do not match the {n}×{t} draws"
        )));
    }
    Ok((0..n * t)
        .map(|c| {
            let p = truth.p[c];
            if p == 0.0 {
                return None;
            }
            let values = hidden_population_draws(draws, y_observed[c], c / t, c % t);
            Some(match variant {
                MapeVariant::PointEstimate => ((p - mean(&values)) / p).abs(),
                MapeVariant::PerDraw => {
                    values.iter().map(|v| ((p - v) / p).abs()).sum::<f64>() / values.len() as f64
                }
            })
        })
        .collect())
}

pub fn mape_summary(
    draws: &PosteriorDraws,
    y_observed: &[f64],
    truth: &LatentTruth,
    variant: MapeVariant,
) -> Result<MapeSummary> {
    let cells = mape_per_cell(draws, y_observed, truth, variant)?;
    let excluded = cells.iter().filter(|c| c.is_none()).count();
    let values: Vec<f64> = cells.into_iter().flatten().collect();
    if values.is_empty() {
        return Err(Error::validation(
            "every true value is zero; MAPE undefined",
        ));
    }
    Ok(MapeSummary {
        average: mean(&values),
        median: median(&values),
        hdi: if values.len() >= MIN_HDI_DRAWS {
            Some(hdi(&values, 0.95)?)
        } else {
            None
        },
        cells: values.len(),
        excluded,
    })
}

fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    let (ma, mb) = (mean(a), mean(b));
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa > 0.0 && sbb > 0.0 {
        Some((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
    } else {
        None
    }
}

/// Average over draws of the Pearson correlation between each drawn vector
/// and the truth.
pub fn rho_hat<'a, I>(draws: I, truth: &[f64]) -> Result<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    if truth.len() < 2 {
        return Err(Error::UndefinedCorrelation(
            "need at least two elements".into(),
        ));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (s, d) in draws.into_iter().enumerate() {
        if d.len() != truth.len() {
            return Err(Error::invalid(format!(
                "draw {s} has {} elements, truth has {}",
                d.len(),
                truth.len()
            )));
        }
        total += pearson(d, truth).ok_or_else(|| {
            Error::UndefinedCorrelation(format!("draw {s} or the truth has zero variance"))
        })?;
        count += 1;
    }
    if count == 0 {
        return Err(Error::validation("no posterior draws"));
    }
    Ok(total / count as f64)
}

/// Latent vectors that have a simulated counterpart.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Latent {
    UPlus,
    EtaPlus,
    V,
}

impl Latent {
    pub const ALL: [Latent; 3] = [Latent::EtaPlus, Latent::UPlus, Latent::V];

    pub fn name(self) -> &'static str {
        match self {
            Latent::UPlus => "u_plus",
            Latent::EtaPlus => "eta_plus",
            Latent::V => "v",
        }
    }

    pub fn of_state(self, s: &ParameterState) -> &[f64] {
        match self {
            Latent::UPlus => &s.u_plus,
            Latent::EtaPlus => &s.eta_plus,
            Latent::V => &s.v,
        }
    }

    pub fn of_truth(self, t: &LatentTruth) -> &[f64] {
        match self {
            Latent::UPlus => &t.u_plus,
            Latent::EtaPlus => &t.eta_plus,
            Latent::V => &t.v,
        }
    }

    /// Sign under which the component enters the log outcome.
    pub fn sign(self) -> f64 {
        match self {
            Latent::V => 1.0,
            _ => -1.0,
        }
    }
}

/// Posterior summary of one latent vector, on the scale it enters the model
/// (`−η⁺`, `−u⁺`, `v`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatentSummary {
    pub component: Latent,
    /// Mean over elements of the posterior-mean vector.
    pub mean: f64,
    /// Median over elements of the posterior-mean vector.
    pub median: f64,
    pub rho_hat: Option<f64>,
    pub truth_mean: Option<f64>,
    pub truth_median: Option<f64>,
}

pub fn latent_summary(
    draws: &PosteriorDraws,
    component: Latent,
    truth: Option<&LatentTruth>,
) -> Result<LatentSummary> {
    require_draws(draws)?;
    let len = component.of_state(&draws.states[0]).len();
    let mut post_mean = vec![0.0; len];
    for s in &draws.states {
        for (m, x) in post_mean.iter_mut().zip(component.of_state(s)) {
            *m += component.sign() * x;
        }
    }
    post_mean.iter_mut().for_each(|m| *m /= draws.len() as f64);
    let (rho, tm, tmed) = match truth {
        Some(tr) => {
            let tv: Vec<f64> = component
                .of_truth(tr)
                .iter()
                .map(|x| component.sign() * x)
                .collect();
            let rho = rho_hat(
                draws.states.iter().map(|s| component.of_state(s)),
                component.of_truth(tr),
            )?;
            (Some(rho), Some(mean(&tv)), Some(median(&tv)))
        }
        None => (None, None, None),
    };
    Ok(LatentSummary {
        component,
        mean: mean(&post_mean),
        median: median(&post_mean),
        rho_hat: rho,
        truth_mean: tm,
        truth_median: tmed,
    })
}

/// Posterior-mean summaries of under-capture and variance composition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UncapturedSummary {
    /// `E[1 − exp(−η_i⁺)]`, averaged over regions.
    pub permanent_pct: f64,
    /// `E[1 − exp(−(η_i⁺ + u_it⁺))]`, averaged over cells.
    pub total_pct: f64,
    /// `E[(σ_η + σ_u) / σ_ε]`.
    pub lambda_stat: f64,
    /// Marginal spatial sd over the total sd of all five components; needs
    /// the average row sum of the spatial graph.
    pub spatial_share: Option<f64>,
}

/// Share of the spatial component in the total standard deviation for one
/// draw, with the spatial sd taken as `σ_v / (0.7 · average row sum)`.
pub fn spatial_share(s: &ParameterState, average_row_sum: f64) -> f64 {
    let sd_v = s.sigma2_v.sqrt() / (0.7 * average_row_sum);
    let total = s.sigma2_eta + s.sigma2_u + sd_v * sd_v + s.sigma2_alpha + s.sigma2_eps;
    sd_v / total.sqrt()
}

pub fn uncaptured_summaries(
    draws: &PosteriorDraws,
    average_row_sum: Option<f64>,
) -> Result<UncapturedSummary> {
    require_draws(draws)?;
    let cells = uncaptured_by_cell(draws);
    let n = draws.n_regions;
    let t = draws.n_periods;
    let permanent = (0..n).map(|i| cells[i * t].permanent_pct).sum::<f64>() / n as f64;
    let total = cells.iter().map(|c| c.total_pct).sum::<f64>() / cells.len() as f64;
    let lambda =
        mean(&draws.series(|s| (s.sigma2_eta.sqrt() + s.sigma2_u.sqrt()) / s.sigma2_eps.sqrt()));
    let share = match average_row_sum {
        Some(d) if d > 0.0 => Some(mean(&draws.series(|s| spatial_share(s, d)))),
        Some(d) => {
            return Err(Error::invalid(format!(
                "average row sum must be positive, got {d}"
            )))
        }
        None => None,
    };
    Ok(UncapturedSummary {
        permanent_pct: permanent,
        total_pct: total,
        lambda_stat: lambda,
        spatial_share: share,
    })
}

/// Posterior-mean uncaptured shares of one cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UncapturedCell {
    pub region: usize,
    pub time: usize,
    pub permanent_pct: f64,
    pub total_pct: f64,
}

pub fn uncaptured_by_cell(draws: &PosteriorDraws) -> Vec<UncapturedCell> {
    let (n, t) = (draws.n_regions, draws.n_periods);
    let mut out: Vec<UncapturedCell> = (0..n * t)
        .map(|c| UncapturedCell {
            region: c / t,
            time: c % t,
            permanent_pct: 0.0,
            total_pct: 0.0,
        })
        .collect();
    for s in &draws.states {
        for (c, cell) in out.iter_mut().enumerate() {
            let eta = s.eta_plus[c / t];
            cell.permanent_pct += 1.0 - (-eta).exp();
            cell.total_pct += 1.0 - (-(eta + s.u_plus[c])).exp();
        }
    }
    let k = draws.len().max(1) as f64;
    for cell in &mut out {
        cell.permanent_pct /= k;
        cell.total_pct /= k;
    }
    out
}

/// Aggregation level for cellwise summaries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Grouping {
    pub by_region: bool,
    pub by_period: bool,
}

/// One aggregated row; `None` in a key means "averaged over".
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UncapturedRow {
    pub region: Option<usize>,
    pub time: Option<usize>,
    pub permanent_pct: f64,
    pub total_pct: f64,
}

pub fn group_uncaptured(cells: &[UncapturedCell], grouping: Grouping) -> Vec<UncapturedRow> {
    use std::collections::BTreeMap;
    let mut acc: BTreeMap<(Option<usize>, Option<usize>), (f64, f64, usize)> = BTreeMap::new();
    for c in cells {
        let key = (
            grouping.by_region.then_some(c.region),
            grouping.by_period.then_some(c.time),
        );
        let e = acc.entry(key).or_insert((0.0, 0.0, 0));
        e.0 += c.permanent_pct;
        e.1 += c.total_pct;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|((region, time), (p, q, k))| UncapturedRow {
            region,
            time,
            permanent_pct: p / k as f64,
            total_pct: q / k as f64,
        })
        .collect()
}

/// Posterior summary row for one scalar.
#[derive(Clone, Debug, PartialEq)]
pub struct ParameterSummary {
    pub name: String,
    pub mean: f64,
    pub median: f64,
    pub hdi_lower: f64,
    pub hdi_upper: f64,
}

pub fn summarize(name: impl Into<String>, values: &[f64], level: f64) -> Result<ParameterSummary> {
    let (lo, hi) = hdi(values, level)?;
    Ok(ParameterSummary {
        name: name.into(),
        mean: mean(values),
        median: median(values),
        hdi_lower: lo,
        hdi_upper: hi,
    })
}

/// Rows for β, the five standard deviations and λ.
pub fn parameter_summaries(draws: &PosteriorDraws, level: f64) -> Result<Vec<ParameterSummary>> {
    require_draws(draws)?;
    let mut rows = Vec::new();
    for k in 0..draws.k_regressors {
        rows.push(summarize(
            format!("beta_{}", k + 1),
            &draws.series(|s| s.beta[k]),
            level,
        )?);
    }
    let sds: [(&str, fn(&ParameterState) -> f64); 5] = [
        ("sigma_eta", |s| s.sigma2_eta.sqrt()),
        ("sigma_u", |s| s.sigma2_u.sqrt()),
        ("sigma_v", |s| s.sigma2_v.sqrt()),
        ("sigma_alpha", |s| s.sigma2_alpha.sqrt()),
        ("sigma_eps", |s| s.sigma2_eps.sqrt()),
    ];
    for (name, f) in sds {
        rows.push(summarize(name, &draws.series(f), level)?);
    }
    rows.push(summarize(
        "lambda",
        &draws.series(|s| (s.sigma2_eta.sqrt() + s.sigma2_u.sqrt()) / s.sigma2_eps.sqrt()),
        level,
    )?);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hdi_on_integers_prefers_lowest_window() {
        let d: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(hdi(&d, 0.9).unwrap(), (1.0, 91.0));
        let mut rev = d.clone();
        rev.reverse();
        assert_eq!(hdi(&rev, 0.9).unwrap(), (1.0, 91.0));
    }

    #[test]
    fn hdi_validates() {
        assert!(matches!(hdi(&[1.0; 99], 0.9), Err(Error::Validation(_))));
        assert!(hdi(&[1.0; 200], 1.0).is_err());
        let mut d = vec![0.0; 200];
        d[3] = f64::NAN;
        assert!(hdi(&d, 0.5).is_err());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn pearson_basics() {
        assert!((pearson(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(pearson(&[1.0, 1.0], &[1.0, 2.0]).is_none());
    }

    #[test]
    fn grouping_levels() {
        let cells: Vec<UncapturedCell> = (0..6)
            .map(|c| UncapturedCell {
                region: c / 3,
                time: c % 3,
                permanent_pct: (c / 3) as f64,
                total_pct: c as f64,
            })
            .collect();
        let all = group_uncaptured(&cells, Grouping::default());
        assert_eq!(all.len(), 1);
        assert!((all[0].total_pct - 2.5).abs() < 1e-12);
        let by_r = group_uncaptured(
            &cells,
            Grouping {
                by_region: true,
                by_period: false,
            },
        );
        assert_eq!(by_r.len(), 2);
        assert_eq!(by_r[1].region, Some(1));
        assert!((by_r[1].total_pct - 4.0).abs() < 1e-12);
        let by_t = group_uncaptured(
            &cells,
            Grouping {
                by_region: false,
                by_period: true,
            },
        );
        assert_eq!(by_t.len(), 3);
        let both = group_uncaptured(
            &cells,
            Grouping {
                by_region: true,
                by_period: true,
            },
        );
        assert_eq!(both.len(), 6);
    }
}
