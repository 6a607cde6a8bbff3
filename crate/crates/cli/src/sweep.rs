use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dqa_core::features::ChannelConfig;
use dqa_core::imageio::decode_image;
use dqa_core::nrbp::{load_model, nrbp_features, svr_predict};
use dqa_core::rrpd::{extract_rr_packet, rrpd_score};
use dqa_core::{Packet64, SvrModel64};
use rayon::prelude::*;
use serde::Serialize;

use crate::args::SweepMode;
use crate::UsageError;

const IMAGE_EXTENSIONS: [&str; 5] = ["png", "bmp", "ppm", "pgm", "pnm"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub candidate_path: String,
    pub score: f64,
    pub mode: SweepMode,
}

/// Candidates ranked best first: ascending RRPD, descending NRBP.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub best: String,
}

impl Serialize for SweepMode {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(match self {
            SweepMode::Rrpd => "rrpd",
            SweepMode::Nrbp => "nrbp",
        })
    }
}

pub fn candidate_images(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    out.sort();
    if out.is_empty() {
        bail!("no candidate images in {}", dir.display());
    }
    Ok(out)
}

/// Reference given as an image is turned into a packet with `cfg`.
fn reference_packet(path: &Path, cfg: &ChannelConfig<f64>) -> Result<Packet64> {
    if path.extension().is_some_and(|e| e == "json") {
        return Ok(Packet64::load(path)?);
    }
    let img = decode_image(path)?;
    Ok(extract_rr_packet(&img, cfg)?)
}

pub fn rank(mut rows: Vec<SweepRow>, mode: SweepMode) -> SweepResult {
    rows.sort_by(|a, b| {
        let by_score = match mode {
            SweepMode::Rrpd => a.score.total_cmp(&b.score),
            SweepMode::Nrbp => b.score.total_cmp(&a.score),
        };
        by_score.then_with(|| a.candidate_path.cmp(&b.candidate_path))
    });
    let best = rows[0].candidate_path.clone();
    SweepResult { rows, best }
}

pub fn sweep(
    mode: SweepMode,
    candidates: &Path,
    reference: Option<&Path>,
    model: Option<&Path>,
    cfg: &ChannelConfig<f64>,
) -> Result<SweepResult> {
    let score: Box<dyn Fn(&Path) -> Result<f64> + Sync> = match mode {
        SweepMode::Rrpd => {
            let reference = reference.ok_or_else(|| UsageError("rrpd sweeps need --ref".into()))?;
            let packet = reference_packet(reference, cfg)?;
            let cfg = *cfg;
            Box::new(move |p| Ok(rrpd_score(&packet, &decode_image(p)?, &cfg)?))
        }
        SweepMode::Nrbp => {
            let model = model.ok_or_else(|| UsageError("nrbp sweeps need --model".into()))?;
            let model: SvrModel64 = load_model(model)?;
            let cfg = *cfg;
            Box::new(move |p| Ok(svr_predict(&model, nrbp_features(&decode_image(p)?, &cfg)?.values())?))
        }
    };
    let paths = candidate_images(candidates)?;
    let rows = paths
        .par_iter()
        .map(|p| {
            Ok(SweepRow {
                candidate_path: p.display().to_string(),
                score: score(p).with_context(|| format!("scoring {}", p.display()))?,
                mode,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(rank(rows, mode))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(p: &str, s: f64) -> SweepRow {
        SweepRow {
            candidate_path: p.into(),
            score: s,
            mode: SweepMode::Rrpd,
        }
    }

    #[test]
    fn ordering_follows_mode() {
        let rows = vec![row("b", 2.0), row("a", 2.0), row("c", 0.5)];
        let r = rank(rows.clone(), SweepMode::Rrpd);
        assert_eq!(r.best, "c");
        assert_eq!(r.rows.iter().map(|r| r.candidate_path.as_str()).collect::<Vec<_>>(), ["c", "a", "b"]);
        let r = rank(rows, SweepMode::Nrbp);
        assert_eq!(r.rows.iter().map(|r| r.candidate_path.as_str()).collect::<Vec<_>>(), ["a", "b", "c"]);
    }
}
