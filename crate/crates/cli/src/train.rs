use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use mgvi_core::mocap::{CorruptionConfig, TrainingPair};
use mgvi_core::pose::read_sequence;
use mgvi_motion::{save_params, train_from, LossBreakdown, MotionModelParams, TrainConfig, TransformerConfig};

use crate::args::TrainArgs;
use crate::fsutil::{ensure_parent, write_atomic};
use crate::simulate::Manifest;
use crate::svg::line_plot;

pub fn load_dataset(dir: &std::path::Path) -> Result<(Manifest, Vec<TrainingPair>)> {
    let manifest = Manifest::read(dir)?;
    let Some(first) = manifest.pairs.first() else {
        bail!("manifest in {} lists no pairs", dir.display());
    };
    let s = first.s;
    let mut pairs = Vec::with_capacity(manifest.pairs.len());
    for e in &manifest.pairs {
        if e.s != s {
            bail!("pair {} has s = {} but pair {} has s = {s}", e.id, e.s, first.id);
        }
        let read = |rel: &str| read_sequence(dir.join(rel)).with_context(|| format!("pair {}: reading {rel}", e.id));
        pairs.push(TrainingPair {
            gt_high: read(&e.gt_high)?,
            gt_low: read(&e.gt_low)?,
            noisy_low: read(&e.noisy_low)?,
            s: e.s,
        });
    }
    Ok((manifest, pairs))
}

pub fn loss_csv(history: &[LossBreakdown]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["epoch", "denoise", "interp", "total"])?;
    for (i, l) in history.iter().enumerate() {
        w.write_record([i.to_string(), l.denoise.to_string(), l.interp.to_string(), l.total.to_string()])?;
    }
    w.into_inner().map_err(|e| anyhow::anyhow!("flushing loss CSV: {e}"))
}

pub fn run(a: &TrainArgs) -> Result<()> {
    let model = TransformerConfig {
        d_model: a.d_model,
        heads: a.heads,
        layers: a.layers,
        d_ff: a.d_ff,
        dropout: a.dropout,
        max_len: a.max_len,
    };
    model.validate()?;
    let side = |name: &str| a.out.parent().map(|p| p.join(name)).unwrap_or_else(|| PathBuf::from(name));
    let csv_path = a.loss_csv.clone().unwrap_or_else(|| side("loss_history.csv"));
    let svg_path = a.plot.clone().unwrap_or_else(|| side("loss_history.svg"));
    for p in [&a.out, &csv_path, &svg_path] {
        if p.is_dir() {
            bail!("output path {} is a directory", p.display());
        }
        ensure_parent(p)?;
    }
    let (manifest, pairs) = load_dataset(&a.data)?;
    let cfg = TrainConfig {
        lr: a.lr,
        beta1: a.beta1,
        beta2: a.beta2,
        adam_eps: a.adam_eps,
        batch_size: a.batch_size,
        epochs: a.epochs,
        lambda_interp: a.lambda_interp,
        seed: a.seed,
        s: pairs[0].s,
        warmup_steps: a.warmup_steps,
        cosine_decay: a.cosine_decay,
        augment: a.augment.then_some(CorruptionConfig {
            noise_sigma_px: manifest.corruption.noise_sigma_px,
            perturb_prob: manifest.corruption.perturb_prob,
            dropout_prob: manifest.corruption.dropout_prob,
            seed: 0,
        }),
    };
    cfg.validate()?;
    let joints = pairs[0].gt_low.joint_count();
    let params = MotionModelParams::new(model, joints, (manifest.image_width, manifest.image_height), a.seed)?;
    if !a.quiet {
        eprintln!(
            "training {} parameters on {} pairs for {} epochs",
            params.parameter_count(),
            pairs.len(),
            a.epochs
        );
    }
    let quiet = a.quiet;
    let (params, history) = train_from(params, &pairs, &cfg, |epoch, l| {
        if !quiet {
            eprintln!("epoch {epoch:3}  denoise {:.5}  interp {:.5}  total {:.5}", l.denoise, l.interp, l.total);
        }
    })?;
    save_params(&params, &a.out).with_context(|| format!("writing checkpoint {}", a.out.display()))?;
    write_atomic(&csv_path, &loss_csv(&history)?)?;
    let series = [
        ("denoise", history.iter().map(|l| l.denoise).collect()),
        ("interp", history.iter().map(|l| l.interp).collect()),
        ("total", history.iter().map(|l| l.total).collect()),
    ];
    write_atomic(&svg_path, line_plot("Training loss", "epoch", &series, true).as_bytes())?;
    Ok(())
}
