//! Standardized incidence ratios with gamma–Poisson smoothing.
//!
//! With `S_it | θ ~ Poisson(E_it θ)` and `θ ~ Gamma(ν, α)` (shape, rate), the
//! posterior is `Gamma(s + ν, E + α)` and the hot-spot evidence for a cell is
//! `P(θ > 1 | s, E)`.

use std::fmt;
use std::path::Path;

use statrs::function::gamma::gamma_ur;

use crate::error::{Error, Result};

/// Default shape and rate of the gamma prior on the relative risk.
pub const DEFAULT_PRIOR: f64 = 0.01;

/// Observed counts and populations, region-major.
#[derive(Clone, Debug, PartialEq)]
pub struct CountPanel {
    n_regions: usize,
    n_periods: usize,
    counts: Vec<u64>,
    population: Vec<f64>,
}

impl CountPanel {
    pub fn new(
        n_regions: usize,
        n_periods: usize,
        counts: Vec<u64>,
        population: Vec<f64>,
    ) -> Result<Self> {
        let cells = n_regions * n_periods;
        if cells == 0 {
            return Err(Error::invalid("count panel needs at least one cell"));
        }
        if counts.len() != cells || population.len() != cells {
            return Err(Error::invalid(format!(
                "expected {cells} counts and populations, got {} and {}",
                counts.len(),
                population.len()
            )));
        }
        if let Some(c) = population.iter().position(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::validation(format!(
                "population at region {} time {} must be positive, got {}",
                c / n_periods,
                c % n_periods,
                population[c]
            )));
        }
        Ok(Self {
            n_regions,
            n_periods,
            counts,
            population,
        })
    }

    pub fn n_regions(&self) -> usize {
        self.n_regions
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn population(&self) -> &[f64] {
        &self.population
    }

    /// Reads `region,time,count,population` with 0-based indices.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(file, path)
    }

    pub fn from_reader<R: std::io::Read>(reader: R, origin: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let expected = ["region", "time", "count", "population"];
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Format {
                path: origin.to_path_buf(),
                line: 1,
                message: format!("expected header `{}`", expected.join(",")),
            });
        }
        let mut rows = Vec::new();
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let line = k + 2;
            let bad = |m: String| Error::Format {
                path: origin.to_path_buf(),
                line,
                message: m,
            };
            if rec.len() != 4 {
                return Err(bad(format!("expected 4 fields, got {}", rec.len())));
            }
            let i: usize = rec[0]
                .parse()
                .map_err(|_| bad(format!("bad region `{}`", &rec[0])))?;
            let t: usize = rec[1]
                .parse()
                .map_err(|_| bad(format!("bad time `{}`", &rec[1])))?;
            let s: u64 = rec[2].parse().map_err(|_| {
                bad(format!(
                    "count must be a non-negative integer, got `{}`",
                    &rec[2]
                ))
            })?;
            let n: f64 = rec[3]
                .parse()
                .map_err(|_| bad(format!("bad population `{}`", &rec[3])))?;
            if !(n > 0.0 && n.is_finite()) {
                return Err(bad(format!("population must be positive, got {n}")));
            }
            rows.push((i, t, s, n, line));
        }
        if rows.is_empty() {
            return Err(Error::validation(format!("{}: no rows", origin.display())));
        }
        let n_regions = rows.iter().map(|r| r.0).max().unwrap() + 1;
        let n_periods = rows.iter().map(|r| r.1).max().unwrap() + 1;
        let cells = n_regions * n_periods;
        let mut counts = vec![0; cells];
        let mut population = vec![f64::NAN; cells];
        for (i, t, s, n, line) in rows {
            let c = i * n_periods + t;
            if !population[c].is_nan() {
                return Err(Error::Format {
                    path: origin.to_path_buf(),
                    line,
                    message: format!("duplicate cell ({i}, {t})"),
                });
            }
            counts[c] = s;
            population[c] = n;
        }
        if let Some(c) = population.iter().position(|p| p.is_nan()) {
            return Err(Error::validation(format!(
                "{}: panel is unbalanced, cell ({}, {}) missing",
                origin.display(),
                c / n_periods,
                c % n_periods
            )));
        }
        Self::new(n_regions, n_periods, counts, population)
    }
}

/// Hot-spot tier: the highest threshold the exceedance probability reaches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Tier {
    None,
    P90,
    P95,
    P99,
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::None => "none",
            Tier::P90 => "90",
            Tier::P95 => "95",
            Tier::P99 => "99",
        })
    }
}

/// Lower bounds for the three tiers; each bound is inclusive.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub p90: f64,
    pub p95: f64,
    pub p99: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            p90: 0.90,
            p95: 0.95,
            p99: 0.99,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x < 1.0;
        if !(ok(self.p90)
            && ok(self.p95)
            && ok(self.p99)
            && self.p90 <= self.p95
            && self.p95 <= self.p99)
        {
            return Err(Error::invalid(format!(
                "thresholds must be increasing and inside (0, 1), got {}, {}, {}",
                self.p90, self.p95, self.p99
            )));
        }
        Ok(())
    }

    pub fn tier(&self, p: f64) -> Tier {
        if p >= self.p99 {
            Tier::P99
        } else if p >= self.p95 {
            Tier::P95
        } else if p >= self.p90 {
            Tier::P90
        } else {
            Tier::None
        }
    }
}

/// Per-cell screening results, region-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SirTable {
    pub n_regions: usize,
    pub n_periods: usize,
    /// `S/E`; `None` where the expected count is zero.
    pub sir: Vec<Option<f64>>,
    pub expected: Vec<f64>,
    /// `P(θ > 1 | s, E)`; empty until [`SirTable::with_exceedance`] runs.
    pub exceedance: Vec<f64>,
    pub prior_nu: f64,
    pub prior_alpha: f64,
}

/// Expected counts `E_it = n_it · Σ_j S_jt / Σ_j n_jt` (standardised within
/// each period) and the ratios `S_it / E_it`.
pub fn compute_sir(panel: &CountPanel) -> Result<SirTable> {
    let (n, t) = (panel.n_regions, panel.n_periods);
    let mut expected = vec![0.0; n * t];
    for s in 0..t {
        let total_s: f64 = (0..n).map(|i| panel.counts[i * t + s] as f64).sum();
        let total_n: f64 = (0..n).map(|i| panel.population[i * t + s]).sum();
        for i in 0..n {
            expected[i * t + s] = panel.population[i * t + s] * total_s / total_n;
        }
    }
    let sir = expected
        .iter()
        .zip(&panel.counts)
        .map(|(&e, &s)| (e > 0.0).then(|| s as f64 / e))
        .collect();
    Ok(SirTable {
        n_regions: n,
        n_periods: t,
        sir,
        expected,
        exceedance: Vec::new(),
        prior_nu: DEFAULT_PRIOR,
        prior_alpha: DEFAULT_PRIOR,
    })
}

/// `P(θ > 1)` for `θ ~ Gamma(shape = s + ν, rate = E + α)`, i.e. the upper
/// regularized incomplete gamma function `Q(s + ν, E + α)`.
pub fn exceedance_probability(s: u64, expected: f64, nu: f64, alpha: f64) -> Result<f64> {
    if !(expected >= 0.0 && expected.is_finite()) {
        return Err(Error::invalid(format!(
            "expected count must be non-negative, got {expected}"
        )));
    }
    if !(nu > 0.0 && alpha > 0.0) {
        return Err(Error::invalid(format!(
            "gamma prior needs positive shape and rate, got {nu}, {alpha}"
        )));
    }
    let shape = s as f64 + nu;
    let rate = expected + alpha;
    Ok(gamma_ur(shape, rate).clamp(0.0, 1.0))
}

impl SirTable {
    /// Fills `exceedance` using the given gamma prior.
    pub fn with_exceedance(mut self, panel: &CountPanel, nu: f64, alpha: f64) -> Result<Self> {
        self.exceedance = self
            .expected
            .iter()
            .zip(&panel.counts)
            .map(|(&e, &s)| exceedance_probability(s, e, nu, alpha))
            .collect::<Result<_>>()?;
        self.prior_nu = nu;
        self.prior_alpha = alpha;
        Ok(self)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>, tiers: &[Tier]) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["region", "time", "sir", "expected", "exceedance", "tier"])?;
        let t = self.n_periods;
        for c in 0..self.n_regions * t {
            w.write_record([
                (c / t).to_string(),
                (c % t).to_string(),
                self.sir[c].map_or_else(|| "NA".to_string(), crate::report::fmt_sig),
                crate::report::fmt_sig(self.expected[c]),
                crate::report::fmt_sig(self.exceedance[c]),
                tiers[c].to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

pub fn flag_hotspots(table: &SirTable, thresholds: &Thresholds) -> Result<Vec<Tier>> {
    thresholds.validate()?;
    if table.exceedance.len() != table.expected.len() {
        return Err(Error::validation(
            "exceedance probabilities have not been computed",
        ));
    }
    Ok(table
        .exceedance
        .iter()
        .map(|&p| thresholds.tier(p))
        .collect())
}
