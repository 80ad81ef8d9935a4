//! Config files: TOML (`key = value`) or JSON. A JSON run manifest is also
//! accepted, in which case its `config` object is used, so a previous run can
//! be repeated with `--config <out>/manifest.json`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;

pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))?;
    let value: serde_json::Value = match path.extension().and_then(|e| e.to_str()) {
        Some("json") => {
            let v: serde_json::Value = serde_json::from_str(&text)
                .with_context(|| format!("{} is not valid JSON", path.display()))?;
            match v {
                serde_json::Value::Object(mut m)
                    if m.contains_key("config") && m.contains_key("tool") =>
                {
                    m.remove("config").unwrap_or_default()
                }
                other => other,
            }
        }
        Some("toml") | None => toml::from_str(&text)
            .with_context(|| format!("{} is not valid TOML", path.display()))?,
        Some(ext) => bail!("unsupported config extension `.{ext}` (use .toml or .json)"),
    };
    serde_json::from_value(value).with_context(|| format!("invalid settings in {}", path.display()))
}

/// Parses a comma-separated list of probabilities.
pub fn parse_levels(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            let x: f64 = p
                .trim()
                .parse()
                .with_context(|| format!("`{p}` is not a number"))?;
            if !(x > 0.0 && x < 1.0) {
                bail!("level {x} must lie in (0, 1)");
            }
            Ok(x)
        })
        .collect()
}
