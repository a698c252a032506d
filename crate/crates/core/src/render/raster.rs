use crate::image::{AlphaMask, Image};
use crate::pose::{Pose2D, SkeletonTopology};
use crate::{Error, Result};

/// Drawing parameters for skeleton images.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterStyle {
    pub limb_thickness_px: f64,
    pub joint_radius_px: f64,
    /// One RGB color per topology edge, in edge order.
    pub limb_colors: Vec<[f64; 3]>,
    pub joint_color: [f64; 3],
}

impl Default for RasterStyle {
    fn default() -> Self {
        Self::with_palette(4.0, 3.0, 18)
    }
}

impl RasterStyle {
    /// Evenly spaced fully saturated hues, one per limb.
    pub fn with_palette(limb_thickness_px: f64, joint_radius_px: f64, limbs: usize) -> Self {
        let limb_colors = (0..limbs).map(|i| hue_to_rgb(i as f64 / limbs.max(1) as f64)).collect();
        Self {
            limb_thickness_px,
            joint_radius_px,
            limb_colors,
            joint_color: [1.0, 1.0, 1.0],
        }
    }

    pub fn validate(&self, topology: &SkeletonTopology) -> Result<()> {
        if !(self.limb_thickness_px > 0.0) || !(self.joint_radius_px > 0.0) {
            return Err(Error::InvalidArgument("limb thickness and joint radius must be positive".into()));
        }
        if self.limb_colors.len() < topology.edges().len() {
            return Err(Error::InvalidArgument(format!(
                "{} limb colors for {} edges",
                self.limb_colors.len(),
                topology.edges().len()
            )));
        }
        Ok(())
    }
}

fn hue_to_rgb(h: f64) -> [f64; 3] {
    let k = |n: f64| {
        let k = (n + h * 6.0) % 6.0;
        1.0 - k.min(4.0 - k).clamp(0.0, 1.0)
    };
    [k(5.0), k(3.0), k(1.0)]
}

/// Distance from `p` to the segment `a..b`.
pub(crate) fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (cx * cx + cy * cy).sqrt()
}

/// Calls `f(x, y)` for every pixel whose center lies within `radius` of the
/// segment, clipped to the canvas.
pub(crate) fn for_each_in_capsule(
    size: (usize, usize),
    a: [f64; 2],
    b: [f64; 2],
    radius: f64,
    mut f: impl FnMut(usize, usize),
) {
    let (w, h) = size;
    let lo_x = (a[0].min(b[0]) - radius - 0.5).floor().max(0.0);
    let hi_x = (a[0].max(b[0]) + radius - 0.5).ceil().min(w as f64 - 1.0);
    let lo_y = (a[1].min(b[1]) - radius - 0.5).floor().max(0.0);
    let hi_y = (a[1].max(b[1]) + radius - 0.5).ceil().min(h as f64 - 1.0);
    if !(lo_x <= hi_x && lo_y <= hi_y) {
        return;
    }
    for y in lo_y as usize..=hi_y as usize {
        for x in lo_x as usize..=hi_x as usize {
            if segment_distance([x as f64 + 0.5, y as f64 + 0.5], a, b) <= radius {
                f(x, y);
            }
        }
    }
}

/// Draws the skeleton and also returns the set of painted pixels.
pub fn rasterize_pose_with_coverage(
    pose: &Pose2D,
    topology: &SkeletonTopology,
    size: (usize, usize),
    style: &RasterStyle,
) -> Result<(Image, AlphaMask)> {
    if pose.joint_count() != topology.joint_count() {
        return Err(Error::JointCount {
            expected: topology.joint_count(),
            found: pose.joint_count(),
        });
    }
    style.validate(topology)?;
    let (w, h) = size;
    let mut img = Image::filled(w, h, 3, 0.0)?;
    let mut coverage = AlphaMask::filled(w, h, 0.0)?;
    let mut paint = |x: usize, y: usize, color: [f64; 3]| {
        for (c, v) in color.iter().enumerate() {
            img.set(x, y, c, *v);
        }
        coverage.set(x, y, 1.0);
    };
    for (j, &c) in pose.coords.iter().enumerate() {
        if pose.visibility[j] {
            for_each_in_capsule(size, c, c, style.joint_radius_px, |x, y| paint(x, y, style.joint_color));
        }
    }
    for (e, &(p, c)) in topology.edges().iter().enumerate() {
        if pose.visibility[p] && pose.visibility[c] {
            let color = style.limb_colors[e];
            for_each_in_capsule(size, pose.coords[p], pose.coords[c], style.limb_thickness_px / 2.0, |x, y| {
                paint(x, y, color)
            });
        }
    }
    Ok((img, coverage))
}

/// Skeleton image on black: joint discs, then limb capsules in limb colors.
pub fn rasterize_pose(pose: &Pose2D, topology: &SkeletonTopology, size: (usize, usize), style: &RasterStyle) -> Result<Image> {
    Ok(rasterize_pose_with_coverage(pose, topology, size, style)?.0)
}

fn convex_hull(mut points: Vec<[f64; 2]>) -> Vec<[f64; 2]> {
    points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    points.dedup();
    if points.len() < 3 {
        return points;
    }
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(points.len() * 2);
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(points.iter()) } else { Box::new(points.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn inside_convex(p: [f64; 2], hull: &[[f64; 2]]) -> bool {
    if hull.len() < 3 {
        return false;
    }
    (0..hull.len()).all(|i| {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0.0
    })
}

/// Binary human region: limb capsules of radius `dilation_px + 1` joined
/// with the convex hull of the visible joints grown by `dilation_px`.
pub fn human_mask_from_pose(
    pose: &Pose2D,
    topology: &SkeletonTopology,
    size: (usize, usize),
    dilation_px: f64,
) -> Result<AlphaMask> {
    if !(dilation_px >= 0.0) || !dilation_px.is_finite() {
        return Err(Error::InvalidArgument(format!("dilation {dilation_px} must be non-negative")));
    }
    if pose.joint_count() != topology.joint_count() {
        return Err(Error::JointCount {
            expected: topology.joint_count(),
            found: pose.joint_count(),
        });
    }
    let (w, h) = size;
    let mut mask = AlphaMask::filled(w, h, 0.0)?;
    let visible: Vec<[f64; 2]> = pose
        .coords
        .iter()
        .zip(&pose.visibility)
        .filter(|(_, &v)| v)
        .map(|(&c, _)| c)
        .collect();
    if visible.is_empty() {
        return Ok(mask);
    }
    for &(p, c) in topology.edges() {
        if pose.visibility[p] && pose.visibility[c] {
            for_each_in_capsule(size, pose.coords[p], pose.coords[c], dilation_px + 1.0, |x, y| mask.set(x, y, 1.0));
        }
    }
    let hull = convex_hull(visible);
    let n = hull.len();
    for i in 0..n {
        let (a, b) = (hull[i], hull[(i + 1) % n]);
        for_each_in_capsule(size, a, b, dilation_px, |x, y| mask.set(x, y, 1.0));
    }
    if n >= 3 {
        let lo_x = hull.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let hi_x = hull.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max).ceil().min(w as f64 - 1.0);
        let lo_y = hull.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
        let hi_y = hull.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max).ceil().min(h as f64 - 1.0);
        if hi_x >= 0.0 && hi_y >= 0.0 {
            for y in lo_y..=hi_y as usize {
                for x in lo_x..=hi_x as usize {
                    if inside_convex([x as f64 + 0.5, y as f64 + 0.5], &hull) {
                        mask.set(x, y, 1.0);
                    }
                }
            }
        }
    }
    Ok(mask)
}
