use super::raster::{human_mask_from_pose, rasterize_pose_with_coverage, RasterStyle};
use super::composite::composite;
use crate::image::{AlphaMask, Image};
use crate::pose::{Pose2D, SkeletonTopology};
use crate::{Error, Result};

/// Deterministic stand-in for the pose-conditioned generator.
///
/// The previous output's human region (mask of `pose_prev`) is erased back
/// to `bg`, the skeleton of `pose_t` is painted over it to form the
/// foreground, and the foreground is blended onto `bg` through the human
/// mask of `pose_t`. Returns `(foreground, mask, composite)`.
#[allow(clippy::too_many_arguments)]
pub fn synthesize_frame(
    pose_t: &Pose2D,
    pose_prev: &Pose2D,
    topology: &SkeletonTopology,
    bg: &Image,
    prev_out: &Image,
    style: &RasterStyle,
    dilation_px: f64,
) -> Result<(Image, AlphaMask, Image)> {
    bg.same_shape(prev_out)?;
    if bg.channels() != 3 {
        return Err(Error::ShapeMismatch("frames must be RGB".into()));
    }
    let size = bg.size();
    let erase = human_mask_from_pose(pose_prev, topology, size, dilation_px)?;
    let base = composite(bg, &erase, prev_out)?;
    let (skeleton, coverage) = rasterize_pose_with_coverage(pose_t, topology, size, style)?;
    let fg = composite(&skeleton, &coverage, &base)?;
    let mask = human_mask_from_pose(pose_t, topology, size, dilation_px)?;
    let out = composite(&fg, &mask, bg)?;
    Ok((fg, mask, out))
}
