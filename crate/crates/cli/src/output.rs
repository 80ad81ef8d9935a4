//! Output directory handling: every file a command produces is registered so
//! that a failed run can remove what it left behind, and the manifest is
//! written atomically as the last step.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

/// Environment variable naming the default root for command outputs.
pub const OUT_ENV: &str = "HIDDENPOP_OUT";

pub fn default_out_dir(subcommand: &str) -> PathBuf {
    let root = std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("hiddenpop-out"));
    root.join(subcommand)
}

#[derive(Debug, Serialize)]
pub struct Manifest<C: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub subcommand: &'static str,
    pub seed: Option<u64>,
    /// Fully resolved settings; `--config manifest.json` reads this back.
    pub config: C,
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub results: serde_json::Value,
    pub duration_secs: f64,
}

pub struct OutputDir {
    root: PathBuf,
    created_root: bool,
    files: Vec<PathBuf>,
    committed: bool,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let created_root = !root.exists();
        fs::create_dir_all(&root)
            .with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self {
            root,
            created_root,
            files: Vec::new(),
            committed: false,
        })
    }

    /// Path of an output file, registered for cleanup on failure.
    pub fn file(&mut self, name: &str) -> PathBuf {
        let p = self.root.join(name);
        self.files.push(p.clone());
        p
    }

    pub fn file_names(&self) -> Vec<String> {
        self.files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect()
    }

    /// Writes `manifest.json` via a temporary file and rename, then marks
    /// the run as complete.
    pub fn commit<C: Serialize>(mut self, manifest: &Manifest<C>) -> Result<PathBuf> {
        let target = self.root.join("manifest.json");
        let mut tmp = tempfile::NamedTempFile::new_in(&self.root)
            .with_context(|| format!("cannot stage manifest in {}", self.root.display()))?;
        serde_json::to_writer_pretty(&mut tmp, manifest)?;
        tmp.write_all(b"\n")?;
        tmp.as_file().sync_all()?;
        tmp.persist(&target)
            .with_context(|| format!("cannot write {}", target.display()))?;
        self.committed = true;
        Ok(target)
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        if self.committed {
            return;
        }
        for f in &self.files {
            let _ = fs::remove_file(f);
        }
        if self.created_root {
            // only succeeds when nothing else was put there
            let _ = fs::remove_dir(&self.root);
        }
    }
}
