//! Optional JSON settings file; explicit command-line flags take precedence.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FamilyMember {
    pub t_clear: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub from: f64,
    pub to: f64,
    pub step: f64,
}

impl Sweep {
    /// Parses `FROM:TO:STEP`.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<&str> = text.split(':').collect();
        let [from, to, step] = parts.as_slice() else {
            bail!("sweep must look like FROM:TO:STEP, got `{text}`");
        };
        let num = |s: &str| s.trim().parse::<f64>().with_context(|| format!("bad number `{s}` in sweep"));
        Ok(Self {
            from: num(from)?,
            to: num(to)?,
            step: num(step)?,
        })
    }

    /// Inclusive list of values; empty when `from > to`.
    pub fn values(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0) {
            bail!("sweep step must be positive, got {}", self.step);
        }
        if self.from > self.to {
            return Ok(Vec::new());
        }
        let count = ((self.to - self.from) / self.step + 1e-9).floor() as usize;
        Ok((0..=count).map(|k| self.from + k as f64 * self.step).collect())
    }
}

/// Settings accepted from `--config`; every field is optional.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub t_clear: Option<f64>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub first_swing: Option<bool>,
    pub t_lo: Option<f64>,
    pub t_hi: Option<f64>,
    pub resolution: Option<f64>,
    pub horizon: Option<f64>,
    pub scan: Option<bool>,
    pub focus: Option<usize>,
    pub axes: Option<[usize; 2]>,
    pub mode: Option<String>,
    pub grid_n: Option<usize>,
    pub half_width: Option<f64>,
    pub sweep: Option<Sweep>,
    pub family: Option<Vec<FamilyMember>>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("cannot parse config {}", path.display()))
    }
}

/// First of flag and file value, or an error naming the flag.
pub fn required<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    match flag.or(file) {
        Some(v) => Ok(v),
        None => bail!("missing required setting --{name} (flag or config file)"),
    }
}
