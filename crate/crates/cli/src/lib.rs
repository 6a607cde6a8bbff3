//! Implementation of the `dqa` command-line tool.

pub mod args;
pub mod format;
pub mod settings;
pub mod sweep;

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use dqa_core::eval::{evaluate, run_protocol, EvalReport};
use dqa_core::features::ChannelConfig;
use dqa_core::imageio::{decode_image, load_manifest, DatasetManifest};
use dqa_core::nrbp::{load_model, nrbp_features, save_model, svr_predict, svr_train, GammaSpec, SvrConfig};
use dqa_core::rrpd::{extract_rr_packet, rrpd_score};
use dqa_core::{Packet64, SvrModel64};
use rayon::prelude::*;
use serde_json::json;

use args::{Cli, Command, NrbpCommand, RrpdCommand, SweepMode};
use format::g6;
use settings::FileConfig;

pub const DEFAULT_SPLITS: usize = 100;

/// Invalid combination of arguments discovered after parsing (exit code 1).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

struct Session {
    json: bool,
    file: FileConfig,
    /// `None` when no layer sets it: packets then supply their own.
    ppd: Option<f64>,
}

impl Session {
    fn channel(&self) -> Result<ChannelConfig<f64>> {
        let mut cfg = match self.ppd {
            Some(ppd) => ChannelConfig::with_ppd(ppd),
            None => ChannelConfig::default(),
        };
        if let Some(p) = self.file.patch_size {
            cfg.patch_size = p;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn svr(&self, c: Option<f64>, gamma: Option<f64>, seed: Option<u64>) -> SvrConfig<f64> {
        let mut cfg = SvrConfig::<f64>::default();
        if let Some(e) = self.file.epsilon {
            cfg.epsilon = e;
        }
        if let Some(f) = self.file.folds {
            cfg.folds = f;
        }
        cfg.seed = seed.or(self.file.seed).unwrap_or(0);
        if let Some(c) = c.or(self.file.c) {
            cfg.c = c;
            cfg.grid = None;
            if let Some(g) = gamma.or(self.file.gamma) {
                cfg.gamma = GammaSpec::Value(g);
            }
        }
        cfg
    }

    fn emit(&self, value: serde_json::Value, text: impl FnOnce() -> String) -> Result<()> {
        let mut out = std::io::stdout().lock();
        if self.json {
            writeln!(out, "{}", serde_json::to_string(&value)?)?;
        } else {
            write!(out, "{}", text())?;
        }
        Ok(())
    }
}

pub fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let env = std::env::var(settings::PPD_ENV).ok();
    let ppd = settings::resolve_ppd(cli.ppd, &file, env.as_deref())?;
    let ctx = Session {
        json: cli.json,
        file,
        ppd,
    };
    match cli.command {
        Command::Rrpd(cmd) => rrpd(&ctx, cmd),
        Command::Nrbp(cmd) => nrbp(&ctx, cmd),
        Command::Eval { pred, manifest } => eval(&ctx, &pred, &manifest),
        Command::Protocol {
            manifest,
            splits,
            seed,
            out,
        } => protocol(&ctx, &manifest, splits, seed, out.as_deref()),
        Command::Sweep(a) => {
            let result = sweep::sweep(a.mode, &a.candidates, a.reference.as_deref(), a.model.as_deref(), &ctx.channel()?)?;
            if let Some(path) = &a.csv {
                let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot write {}", path.display()))?;
                w.write_record(["candidate_path", "score", "mode"])?;
                for r in &result.rows {
                    let mode = if r.mode == SweepMode::Rrpd { "rrpd" } else { "nrbp" };
                    w.write_record([r.candidate_path.as_str(), &r.score.to_string(), mode])?;
                }
                w.flush()?;
            }
            ctx.emit(serde_json::to_value(&result)?, || {
                let header = match a.mode {
                    SweepMode::Rrpd => "RRPD (lower is better)",
                    SweepMode::Nrbp => "NRBP (higher is better)",
                };
                let mut s = format!("rank\t{header}\tcandidate\n");
                for (k, r) in result.rows.iter().enumerate() {
                    s += &format!("{}\t{}\t{}\n", k + 1, g6(r.score), r.candidate_path);
                }
                s + &format!("best\t{}\n", result.best)
            })
        }
    }
}

fn rrpd(ctx: &Session, cmd: RrpdCommand) -> Result<()> {
    match cmd {
        RrpdCommand::Extract { input, output } => {
            let packet = extract_rr_packet(&decode_image::<f64>(&input)?, &ctx.channel()?)?;
            packet.save(&output)?;
            ctx.emit(json!({ "packet": output, "ppd": packet.ppd }), || {
                format!("wrote {}\n", output.display())
            })
        }
        RrpdCommand::Score { packet, input } => {
            let packet = Packet64::load(&packet)?;
            let cfg = match ctx.ppd {
                Some(_) => ctx.channel()?,
                None => ChannelConfig {
                    csf: dqa_core::structure::CsfParams::with_ppd(packet.ppd),
                    ..ctx.channel()?
                },
            };
            let score = rrpd_score(&packet, &decode_image(&input)?, &cfg)?;
            ctx.emit(json!({ "image": input, "rrpd": score, "lower_is_better": true }), || {
                format!("{}\n", g6(score))
            })
        }
    }
}

fn read_training(db: &DatasetManifest, cfg: &ChannelConfig<f64>) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let x = db
        .entries
        .par_iter()
        .map(|e| {
            let img = decode_image(&e.image_path)?;
            Ok(nrbp_features(&img, cfg)?.into_values())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((x, db.entries.iter().map(|e| e.mos).collect()))
}

fn nrbp(ctx: &Session, cmd: NrbpCommand) -> Result<()> {
    let cfg = ctx.channel()?;
    match cmd {
        NrbpCommand::Features { input, output } => {
            let fv = nrbp_features(&decode_image(&input)?, &cfg)?;
            fv.save(&output)?;
            ctx.emit(json!({ "features": output, "len": fv.values().len() }), || {
                format!("wrote {} values to {}\n", fv.values().len(), output.display())
            })
        }
        NrbpCommand::Train {
            manifest,
            model,
            c,
            gamma,
            grid,
            seed,
        } => {
            let svr = ctx.svr(if grid { None } else { c }, gamma, seed);
            let (x, y) = read_training(&load_manifest(&manifest)?, &cfg)?;
            let m = svr_train(&x, &y, &svr)?;
            save_model(&m, &model)?;
            ctx.emit(
                json!({
                    "model": model,
                    "support_vectors": m.support_vectors.len(),
                    "c": m.train_meta.c,
                    "gamma": m.kernel_gamma,
                }),
                || {
                    format!(
                        "wrote {} ({} support vectors, c {}, gamma {})\n",
                        model.display(),
                        m.support_vectors.len(),
                        g6(m.train_meta.c),
                        g6(m.kernel_gamma)
                    )
                },
            )
        }
        NrbpCommand::Predict {
            model,
            input,
            manifest,
            output,
        } => {
            let m: SvrModel64 = load_model(&model)?;
            let predict = |p: &Path| -> Result<f64> { Ok(svr_predict(&m, nrbp_features(&decode_image(p)?, &cfg)?.values())?) };
            if let Some(input) = input {
                let score = predict(&input)?;
                return ctx.emit(json!({ "image": input, "nrbp": score, "higher_is_better": true }), || {
                    format!("{}\n", g6(score))
                });
            }
            let (manifest, output) = (manifest.expect("clap enforces"), output.expect("clap enforces"));
            let db = load_manifest(&manifest)?;
            let scores = db
                .entries
                .par_iter()
                .map(|e| predict(&e.image_path).with_context(|| format!("scoring {}", e.image_path.display())))
                .collect::<Result<Vec<_>>>()?;
            let mut w = csv::Writer::from_path(&output).with_context(|| format!("cannot write {}", output.display()))?;
            w.write_record(["image_path", "score"])?;
            for (e, s) in db.entries.iter().zip(&scores) {
                w.write_record([absolute(&e.image_path).display().to_string(), s.to_string()])?;
            }
            w.flush()?;
            ctx.emit(json!({ "predictions": output, "n": scores.len() }), || {
                format!("wrote {} predictions to {}\n", scores.len(), output.display())
            })
        }
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn same_file_key(p: &Path) -> PathBuf {
    std::fs::canonicalize(p).unwrap_or_else(|_| absolute(p))
}

/// Predictions CSV (`image_path,score`) joined to manifest MOS by path.
fn read_predictions(pred: &Path, db: &DatasetManifest) -> Result<(Vec<f64>, Vec<f64>)> {
    let base = pred.parent().unwrap_or_else(|| Path::new(""));
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(pred)
        .with_context(|| format!("cannot read {}", pred.display()))?;
    let headers = reader.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["image_path", "score"] {
        bail!("{}: header must be image_path,score", pred.display());
    }
    let mut scores = std::collections::HashMap::new();
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let path = base.join(&rec[0]);
        let score: f64 = rec[1]
            .parse()
            .with_context(|| format!("{} row {}: bad score {:?}", pred.display(), k + 2, &rec[1]))?;
        scores.insert(same_file_key(&path), score);
    }
    let mut q = Vec::with_capacity(db.len());
    for e in &db.entries {
        let s = scores
            .get(&same_file_key(&e.image_path))
            .with_context(|| format!("no prediction for {}", e.image_path.display()))?;
        q.push(*s);
    }
    Ok((q, db.entries.iter().map(|e| e.mos).collect()))
}

fn report_text(r: &EvalReport<f64>) -> String {
    let l = &r.logistic;
    format!(
        "srcc\t{}\nkrcc\t{}\nplcc\t{}\nrmse\t{}\nn\t{}\nlogistic\t{} {} {} {} {}\n",
        g6(r.srcc),
        g6(r.krcc),
        g6(r.plcc),
        g6(r.rmse),
        r.n,
        g6(l.b1),
        g6(l.b2),
        g6(l.b3),
        g6(l.b4),
        g6(l.b5)
    )
}

fn eval(ctx: &Session, pred: &Path, manifest: &Path) -> Result<()> {
    let (q, s) = read_predictions(pred, &load_manifest(manifest)?)?;
    let report = evaluate(&q, &s)?;
    ctx.emit(serde_json::to_value(&report)?, || report_text(&report))
}

fn protocol(ctx: &Session, manifest: &Path, splits: Option<usize>, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let db = load_manifest(manifest)?;
    let seed = seed.or(ctx.file.seed).unwrap_or(0);
    let splits = splits.or(ctx.file.splits).unwrap_or(DEFAULT_SPLITS);
    let report = run_protocol(&db, &ctx.svr(None, None, Some(seed)), &ctx.channel()?, splits, seed)?;
    if let Some(out) = out {
        let text = serde_json::to_string_pretty(&report)? + "\n";
        std::fs::write(out, text).with_context(|| format!("cannot write {}", out.display()))?;
    }
    ctx.emit(serde_json::to_value(&report)?, || report_text(&report))
}
