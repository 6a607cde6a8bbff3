//! Layered settings: flags > `--config` file > `DQA_PPD` (ppd only) > defaults.

use std::path::Path;

use anyhow::{Context, Result};
use serde::Deserialize;

pub const PPD_ENV: &str = "DQA_PPD";

#[derive(Debug, Default, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub ppd: Option<f64>,
    pub patch_size: Option<usize>,
    pub seed: Option<u64>,
    pub splits: Option<usize>,
    pub c: Option<f64>,
    pub gamma: Option<f64>,
    pub epsilon: Option<f64>,
    pub folds: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}

/// Resolved ppd, or `None` when no layer sets it.
pub fn resolve_ppd(flag: Option<f64>, file: &FileConfig, env: Option<&str>) -> Result<Option<f64>> {
    if flag.is_some() {
        return Ok(flag);
    }
    if file.ppd.is_some() {
        return Ok(file.ppd);
    }
    match env {
        Some(v) => {
            let ppd: f64 = v.trim().parse().with_context(|| format!("{PPD_ENV}={v:?} is not a number"))?;
            Ok(Some(ppd))
        }
        None => Ok(None),
    }
}
