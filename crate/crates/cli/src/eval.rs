use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use mgvi_core::image::{AlphaMask, Image};
use mgvi_core::metrics::{aggregate_pose_reports, image_metrics, pose_l1, write_image_csv, write_pose_csv};
use mgvi_core::pose::read_sequence;

use crate::args::{EvalArgs, EvalMode};
use crate::fsutil::{ensure_parent, file_stem, list_files, write_atomic};
use crate::svg::line_plot;

/// Pairs up prediction and ground-truth files by name; single files pair
/// directly.
fn pose_pairs(pred: &Path, gt: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    match (pred.is_dir(), gt.is_dir()) {
        (false, false) => {
            for p in [pred, gt] {
                if !p.is_file() {
                    bail!("{} does not exist", p.display());
                }
            }
            Ok(vec![(file_stem(gt), pred.to_path_buf(), gt.to_path_buf())])
        }
        (true, true) => {
            let gts = list_files(gt, "pose")?;
            if gts.is_empty() {
                bail!("no .pose files in {}", gt.display());
            }
            let preds = list_files(pred, "pose")?;
            if preds.len() != gts.len() {
                bail!("{} predicted sequences vs {} ground truth", preds.len(), gts.len());
            }
            gts.into_iter()
                .map(|g| {
                    let p = pred.join(g.file_name().expect("listed file"));
                    if !p.is_file() {
                        bail!("no prediction {} for {}", p.display(), g.display());
                    }
                    Ok((file_stem(&g), p, g))
                })
                .collect()
        }
        _ => bail!("--pred and --gt must both be files or both be directories"),
    }
}

fn eval_pose(a: &EvalArgs) -> Result<(Vec<u8>, String)> {
    let pairs = pose_pairs(&a.pred, &a.gt)?;
    let mut rows = Vec::with_capacity(pairs.len());
    for (id, p, g) in pairs {
        let pred = read_sequence(&p).with_context(|| format!("reading {}", p.display()))?;
        let gt = read_sequence(&g).with_context(|| format!("reading {}", g.display()))?;
        let report = pose_l1(&pred, &gt).with_context(|| format!("scoring {id}"))?;
        rows.push((id, report));
    }
    let reports: Vec<_> = rows.iter().map(|(_, r)| r.clone()).collect();
    let (avg, max) = aggregate_pose_reports(&reports)?;
    eprintln!("{} sequences  avg L1 {avg:.4} px  max L1 {max:.4} px", rows.len());
    let mut csv = Vec::new();
    write_pose_csv(&mut csv, &rows)?;
    let per_frame: Vec<f64> = rows.iter().flat_map(|(_, r)| r.per_frame.iter().copied()).collect();
    let svg = line_plot("Per-frame mean L1 (px)", "frame", &[("l1", per_frame)], true);
    Ok((csv, svg))
}

fn eval_image(a: &EvalArgs) -> Result<(Vec<u8>, String)> {
    for p in [&a.pred, &a.gt] {
        if !p.is_dir() {
            bail!("image mode expects frame directories; {} is not one", p.display());
        }
    }
    let gts = list_files(&a.gt, "ppm")?;
    let preds = list_files(&a.pred, "ppm")?;
    if gts.is_empty() {
        bail!("no .ppm frames in {}", a.gt.display());
    }
    if preds.len() != gts.len() {
        bail!("{} predicted frames vs {} ground truth", preds.len(), gts.len());
    }
    let masks = match &a.masks {
        Some(dir) => {
            let m = list_files(dir, "pgm")?;
            if m.len() != gts.len() {
                bail!("{} masks vs {} frames", m.len(), gts.len());
            }
            Some(m)
        }
        None => None,
    };
    let mut rows = Vec::with_capacity(gts.len());
    for (i, (p, g)) in preds.iter().zip(&gts).enumerate() {
        let pred = Image::read_pnm(p).with_context(|| format!("reading {}", p.display()))?;
        let gt = Image::read_pnm(g).with_context(|| format!("reading {}", g.display()))?;
        let mask = match &masks {
            Some(m) => Some(AlphaMask::read_pgm(&m[i]).with_context(|| format!("reading {}", m[i].display()))?),
            None => None,
        };
        rows.push((i, image_metrics(&pred, &gt, mask.as_ref()).with_context(|| format!("scoring frame {i}"))?));
    }
    let mut csv = Vec::new();
    write_image_csv(&mut csv, &rows)?;
    let mut series = vec![
        ("psnr", rows.iter().map(|(_, r)| r.psnr_db).collect::<Vec<_>>()),
        ("ssim", rows.iter().map(|(_, r)| r.ssim).collect()),
    ];
    if masks.is_some() {
        let opt = |v: Option<f64>| v.unwrap_or(f64::NAN);
        series.push(("masked_psnr", rows.iter().map(|(_, r)| opt(r.masked_psnr_db)).collect()));
        series.push(("masked_ssim", rows.iter().map(|(_, r)| opt(r.masked_ssim)).collect()));
    }
    Ok((csv, line_plot("Per-frame image quality", "frame", &series, false)))
}

pub fn run(a: &EvalArgs) -> Result<()> {
    let plot = a.plot.clone().unwrap_or_else(|| a.out.with_extension("svg"));
    if plot == a.out {
        bail!("--plot and --out must differ");
    }
    for p in [&a.out, &plot] {
        if p.is_dir() {
            bail!("output path {} is a directory", p.display());
        }
        ensure_parent(p)?;
    }
    let (csv, svg) = match a.mode {
        EvalMode::Pose => eval_pose(a)?,
        EvalMode::Image => eval_image(a)?,
    };
    write_atomic(&a.out, &csv)?;
    write_atomic(&plot, svg.as_bytes())
}
