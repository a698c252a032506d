use super::{Pose2D, PoseSequence};
use crate::{Error, Result};

/// Per-joint affine blend `(1 - alpha) * a + alpha * b`.
///
/// A joint invisible in either endpoint comes out invisible at (0, 0).
pub fn lerp_pose(a: &Pose2D, b: &Pose2D, alpha: f64) -> Result<Pose2D> {
    if a.joint_count() != b.joint_count() {
        return Err(Error::TopologyMismatch);
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("alpha {alpha} outside [0, 1]")));
    }
    let wa = 1.0 - alpha;
    let mut coords = Vec::with_capacity(a.joint_count());
    let mut visibility = Vec::with_capacity(a.joint_count());
    for j in 0..a.joint_count() {
        let vis = a.visibility[j] && b.visibility[j];
        visibility.push(vis);
        coords.push(if vis && a.coords[j] == b.coords[j] {
            a.coords[j]
        } else if vis {
            [
                wa * a.coords[j][0] + alpha * b.coords[j][0],
                wa * a.coords[j][1] + alpha * b.coords[j][1],
            ]
        } else {
            [0.0, 0.0]
        });
    }
    Ok(Pose2D { coords, visibility })
}

fn check_upsample(seq: &PoseSequence, s: usize) -> Result<()> {
    if s == 0 {
        return Err(Error::InvalidArgument("upsampling factor must be positive".into()));
    }
    if seq.len() < 2 {
        return Err(Error::TooFewFrames { need: 2, got: seq.len() });
    }
    Ok(())
}

fn factor_u32(s: usize) -> Result<u32> {
    u32::try_from(s).map_err(|_| Error::InvalidArgument(format!("factor {s} too large")))
}

/// Linear upsampling: `T + 1` keyframes become `s * T + 1` frames.
pub fn upsample_linear(seq: &PoseSequence, s: usize) -> Result<PoseSequence> {
    check_upsample(seq, s)?;
    let fps = seq.fps.times(factor_u32(s)?);
    let mut frames = Vec::with_capacity(s * (seq.len() - 1) + 1);
    for pair in seq.frames.windows(2) {
        frames.push(pair[0].clone());
        for k in 1..s {
            frames.push(lerp_pose(&pair[0], &pair[1], k as f64 / s as f64)?);
        }
    }
    frames.push(seq.frames[seq.len() - 1].clone());
    PoseSequence::new(frames, fps, seq.topology.clone())
}

/// Quadratic upsampling through three neighbouring keyframes.
///
/// Interval `[t, t+1]` uses keyframes `t-1, t, t+1`, shifted inward to
/// `0, 1, 2` on the first interval. Joints missing from the third keyframe
/// fall back to linear blending; two-frame inputs reduce to
/// [`upsample_linear`].
pub fn upsample_quadratic(seq: &PoseSequence, s: usize) -> Result<PoseSequence> {
    check_upsample(seq, s)?;
    if seq.len() == 2 {
        return upsample_linear(seq, s);
    }
    let fps = seq.fps.times(factor_u32(s)?);
    let last = seq.len() - 1;
    let mut frames = Vec::with_capacity(s * last + 1);
    for t in 0..last {
        let w = t.saturating_sub(1).min(last - 2);
        let window = [&seq.frames[w], &seq.frames[w + 1], &seq.frames[w + 2]];
        frames.push(seq.frames[t].clone());
        for k in 1..s {
            let alpha = k as f64 / s as f64;
            let mut pose = lerp_pose(&seq.frames[t], &seq.frames[t + 1], alpha)?;
            // local time measured from the window start
            let u = (t - w) as f64 + alpha;
            let weights = [(u - 1.0) * (u - 2.0) / 2.0, -u * (u - 2.0), u * (u - 1.0) / 2.0];
            for j in 0..pose.joint_count() {
                if pose.visibility[j] && window.iter().all(|f| f.visibility[j]) {
                    for axis in 0..2 {
                        pose.coords[j][axis] = weights
                            .iter()
                            .zip(&window)
                            .map(|(wt, f)| wt * f.coords[j][axis])
                            .sum();
                    }
                }
            }
            frames.push(pose);
        }
    }
    frames.push(seq.frames[last].clone());
    PoseSequence::new(frames, fps, seq.topology.clone())
}

/// Keeps every `s`-th frame starting at frame 0.
pub fn downsample(seq: &PoseSequence, s: usize) -> Result<PoseSequence> {
    if s == 0 {
        return Err(Error::InvalidArgument("downsampling factor must be positive".into()));
    }
    if !(seq.len() - 1).is_multiple_of(s) {
        return Err(Error::NotDivisible { frames: seq.len(), s });
    }
    let frames = seq.frames.iter().step_by(s).cloned().collect();
    PoseSequence::new(frames, seq.fps.divided_by(factor_u32(s)?), seq.topology.clone())
}
