//! CSV writers for analysis outputs. Floating-point values are written with
//! six significant digits in the style of C's `%g`.

use std::path::Path;

use crate::analysis::{
    CoverageReport, LatentSummary, MapeSummary, ParameterSummary, UncapturedRow,
};
use crate::draws::ChainStats;
use crate::error::{Error, Result};

/// Six significant digits, trailing zeros trimmed, scientific notation for
/// exponents below −4 or above 5.
///
/// ```
/// use hiddenpop::report::fmt_sig;
/// assert_eq!(fmt_sig(0.123456789), "0.123457");
/// assert_eq!(fmt_sig(1234567.0), "1.23457e+06");
/// assert_eq!(fmt_sig(0.5), "0.5");
/// ```
pub fn fmt_sig(x: f64) -> String {
    const DIGITS: i32 = 6;
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, fmt_sig)
}

fn finish(mut w: csv::Writer<std::fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_summary_csv(
    path: impl AsRef<Path>,
    rows: &[ParameterSummary],
    level: f64,
) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "parameter",
        "mean",
        "median",
        "hdi_lower",
        "hdi_upper",
        "level",
    ])?;
    for r in rows {
        w.write_record([
            r.name.clone(),
            fmt_sig(r.mean),
            fmt_sig(r.median),
            fmt_sig(r.hdi_lower),
            fmt_sig(r.hdi_upper),
            fmt_sig(level),
        ])?;
    }
    finish(w, path)
}

pub fn write_latent_csv(path: impl AsRef<Path>, rows: &[LatentSummary]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "component",
        "mean",
        "median",
        "rho_hat",
        "truth_mean",
        "truth_median",
    ])?;
    for r in rows {
        let name = match r.component.sign() < 0.0 {
            true => format!("-{}", r.component.name()),
            false => r.component.name().to_string(),
        };
        w.write_record([
            name,
            fmt_sig(r.mean),
            fmt_sig(r.median),
            opt(r.rho_hat),
            opt(r.truth_mean),
            opt(r.truth_median),
        ])?;
    }
    finish(w, path)
}

pub fn write_coverage_csv(path: impl AsRef<Path>, rows: &[CoverageReport]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "level",
        "mean_coverage",
        "hdi_lower",
        "hdi_upper",
        "hits",
        "cells",
        "a",
        "b",
    ])?;
    for r in rows {
        w.write_record([
            fmt_sig(r.nominal_level),
            fmt_sig(r.posterior_mean_coverage),
            fmt_sig(r.coverage_hdi.0),
            fmt_sig(r.coverage_hdi.1),
            r.hits.to_string(),
            r.cells.to_string(),
            fmt_sig(r.a),
            fmt_sig(r.b),
        ])?;
    }
    finish(w, path)
}

pub fn write_mape_csv(path: impl AsRef<Path>, m: &MapeSummary, variant: &str) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "variant",
        "average",
        "median",
        "hdi_lower",
        "hdi_upper",
        "cells",
        "excluded",
    ])?;
    w.write_record([
        variant.to_string(),
        fmt_sig(m.average),
        fmt_sig(m.median),
        opt(m.hdi.map(|h| h.0)),
        opt(m.hdi.map(|h| h.1)),
        m.cells.to_string(),
        m.excluded.to_string(),
    ])?;
    finish(w, path)
}

/// `region,time,permanent_pct,total_pct`; an averaged-over key is written as
/// `all`.
pub fn write_uncaptured_csv(path: impl AsRef<Path>, rows: &[UncapturedRow]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["region", "time", "permanent_pct", "total_pct"])?;
    let key = |k: Option<usize>| k.map_or_else(|| "all".to_string(), |v| v.to_string());
    for r in rows {
        w.write_record([
            key(r.region),
            key(r.time),
            fmt_sig(r.permanent_pct),
            fmt_sig(r.total_pct),
        ])?;
    }
    finish(w, path)
}

/// Per-chain Metropolis–Hastings acceptance and variance-floor counts.
pub fn write_acceptance_csv(path: impl AsRef<Path>, stats: &[ChainStats]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "chain",
        "proposals",
        "accepted_alpha",
        "accepted_eps",
        "acceptance_alpha",
        "acceptance_eps",
        "floored",
    ])?;
    for (c, s) in stats.iter().enumerate() {
        w.write_record([
            c.to_string(),
            s.proposals.to_string(),
            s.accepted_alpha.to_string(),
            s.accepted_eps.to_string(),
            fmt_sig(s.acceptance_alpha()),
            fmt_sig(s.acceptance_eps()),
            s.floored.to_string(),
        ])?;
    }
    finish(w, path)
}
