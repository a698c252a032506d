use std::fs;

use anyhow::{bail, Context, Result};
use mgvi_core::image::Image;
use mgvi_core::pose::{read_sequence, Pose2D};
use mgvi_core::render::{synthesize_frame, RasterStyle};

use crate::args::RenderArgs;
use crate::fsutil::{list_files, require_file, write_atomic};

fn read_rgb(path: &std::path::Path) -> Result<Image> {
    Ok(Image::read_pnm(path).with_context(|| format!("reading background {}", path.display()))?.to_rgb())
}

pub fn run(a: &RenderArgs) -> Result<()> {
    require_file(&a.poses, "pose sequence")?;
    let bg_paths = if a.bg.is_dir() {
        list_files(&a.bg, "ppm")?
    } else {
        require_file(&a.bg, "background")?;
        vec![a.bg.clone()]
    };
    if bg_paths.is_empty() {
        bail!("no .ppm backgrounds in {}", a.bg.display());
    }
    let seq = read_sequence(&a.poses).with_context(|| format!("reading {}", a.poses.display()))?;
    let n = seq.len();
    if !a.static_bg && bg_paths.len() != n {
        bail!(
            "{n} poses but {} backgrounds; pass --static-bg to reuse the first background",
            bg_paths.len()
        );
    }
    let style = RasterStyle::with_palette(a.limb_thickness, a.joint_radius, seq.topology.edges().len());
    style.validate(&seq.topology)?;
    if !(a.mask_dilation >= 0.0) || !a.mask_dilation.is_finite() {
        bail!("--mask-dilation must be a non-negative number");
    }
    let backgrounds = if a.static_bg {
        vec![read_rgb(&bg_paths[0])?]
    } else {
        bg_paths.iter().map(|p| read_rgb(p)).collect::<Result<Vec<_>>>()?
    };
    let size = backgrounds[0].size();
    if let Some(i) = backgrounds.iter().position(|b| b.size() != size) {
        bail!("background {} is {:?}, the first is {size:?}", bg_paths[i].display(), backgrounds[i].size());
    }
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let mut prev_out = backgrounds[0].clone();
    let mut pose_prev = Pose2D::invisible(seq.joint_count());
    for (i, pose) in seq.frames.iter().enumerate() {
        let bg = &backgrounds[if a.static_bg { 0 } else { i }];
        let (_, mask, out) = synthesize_frame(pose, &pose_prev, &seq.topology, bg, &prev_out, &style, a.mask_dilation)
            .with_context(|| format!("synthesizing frame {i}"))?;
        write_atomic(&a.out.join(format!("frame_{i:06}.ppm")), &out.encode_pnm())?;
        write_atomic(&a.out.join(format!("mask_{i:06}.pgm")), &mask.to_image().encode_pnm())?;
        prev_out = out;
        pose_prev = pose.clone();
    }
    Ok(())
}
