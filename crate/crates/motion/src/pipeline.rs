use mgvi_autodiff::Tensor;
use mgvi_core::pose::{upsample_linear, PoseSequence};

use crate::encoding::encode_sequence;
use crate::network::run;
use crate::{MotionError, MotionModelParams, Result};

fn check(params: &MotionModelParams, seq: &PoseSequence) -> Result<()> {
    if seq.joint_count() != params.joints {
        return Err(MotionError::DimensionMismatch {
            expected: params.joints,
            found: seq.joint_count(),
        });
    }
    if seq.len() > params.config.max_len {
        return Err(MotionError::TooLong {
            len: seq.len(),
            max_len: params.config.max_len,
        });
    }
    Ok(())
}

/// Adds a residual in normalized units back onto pixel coordinates.
fn apply_residual(params: &MotionModelParams, seq: &mut PoseSequence, delta: &Tensor) {
    let half = [params.image_size.0 as f64 / 2.0, params.image_size.1 as f64 / 2.0];
    let j = params.joints;
    for (frame, row) in seq.frames.iter_mut().zip(delta.data().chunks(2 * j)) {
        for (c, d) in frame.coords.iter_mut().zip(row.chunks(2)) {
            c[0] += d[0] * half[0];
            c[1] += d[1] * half[1];
        }
    }
}

/// Noisy low-rate sequence plus the denoiser's correction. Every joint of the
/// result is marked visible.
pub fn denoise(params: &MotionModelParams, noisy_low: &PoseSequence) -> Result<PoseSequence> {
    check(params, noisy_low)?;
    let x = encode_sequence(noisy_low, params.image_size)?;
    let delta = run(&params.config, &params.denoiser, x)?;
    let mut out = noisy_low.with_all_visible();
    apply_residual(params, &mut out, &delta);
    Ok(out)
}

/// Linearly upsampled sequence plus the interpolator's non-linear correction.
///
/// The network sees every joint as visible. Joints invisible in the input
/// stay invisible at (0, 0).
pub fn interpolate(params: &MotionModelParams, linear_high: &PoseSequence) -> Result<PoseSequence> {
    check(params, linear_high)?;
    let x = encode_sequence(&linear_high.with_all_visible(), params.image_size)?;
    let delta = run(&params.config, &params.interpolator, x)?;
    let mut out = linear_high.clone();
    apply_residual(params, &mut out, &delta);
    for f in &mut out.frames {
        f.canonicalize();
    }
    Ok(out)
}

/// Denoise, upsample linearly by `s`, then interpolate.
pub fn upsample_motion(params: &MotionModelParams, noisy_low: &PoseSequence, s: usize) -> Result<PoseSequence> {
    let clean = denoise(params, noisy_low)?;
    let linear = upsample_linear(&clean, s)?;
    interpolate(params, &linear)
}

/// Overwrites every `s`-th frame of `high` with the matching keyframe.
pub fn pin_keyframes(high: &mut PoseSequence, keyframes: &PoseSequence, s: usize) -> Result<()> {
    if s == 0 || high.len() != s * (keyframes.len().max(1) - 1) + 1 {
        return Err(MotionError::DimensionMismatch {
            expected: s * (keyframes.len().max(1) - 1) + 1,
            found: high.len(),
        });
    }
    for (i, k) in keyframes.frames.iter().enumerate() {
        high.frames[i * s] = k.clone();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::TransformerConfig;
    use mgvi_core::pose::{Fps, Pose2D, SkeletonTopology};

    fn small() -> MotionModelParams {
        let cfg = TransformerConfig {
            d_model: 16,
            heads: 2,
            layers: 1,
            d_ff: 16,
            ..TransformerConfig::default()
        };
        MotionModelParams::new(cfg, 19, (256, 256), 11).unwrap()
    }

    fn noisy(n: usize) -> PoseSequence {
        let frames = (0..n)
            .map(|t| {
                let mut p = Pose2D::all_visible(
                    (0..19)
                        .map(|j| [40.0 + 7.3 * j as f64 + 3.1 * t as f64, 90.0 + (j as f64 * 0.7 + t as f64).sin() * 20.0])
                        .collect(),
                );
                p.visibility[(t * 5) % 19] = false;
                p.coords[(t * 5) % 19] = [0.0, 0.0];
                p
            })
            .collect();
        PoseSequence::new(frames, Fps::new(15, 2).unwrap(), SkeletonTopology::body19()).unwrap()
    }

    #[test]
    fn zero_networks_are_identities() {
        let p = small();
        let seq = noisy(4);
        let d = denoise(&p, &seq).unwrap();
        assert_eq!(d, seq.with_all_visible());
        let lin = upsample_linear(&d, 8).unwrap();
        assert_eq!(interpolate(&p, &lin).unwrap(), lin);
        let up = upsample_motion(&p, &seq, 8).unwrap();
        assert_eq!(up, upsample_linear(&seq.with_all_visible(), 8).unwrap());
        assert_eq!(up.len(), 25);
        assert_eq!(up.fps, Fps::integer(60).unwrap());
    }

    #[test]
    fn interpolate_keeps_invisible_joints_at_origin() {
        let mut p = small();
        let k = p.interpolator.len() - 1;
        p.interpolator[k].data_mut().iter_mut().for_each(|v| *v = 0.01);
        let seq = noisy(3);
        let out = interpolate(&p, &seq).unwrap();
        assert!(!out.frames[0].visibility[0]);
        assert_eq!(out.frames[0].coords[0], [0.0, 0.0]);
        assert!((out.frames[0].coords[1][0] - (seq.frames[0].coords[1][0] + 1.28)).abs() < 1e-9);
    }

    #[test]
    fn rejects_wrong_joint_count_and_length() {
        let p = small();
        let topo = SkeletonTopology::from_edges(3, vec![(0, 1), (1, 2)]).unwrap();
        let seq = PoseSequence::new(vec![Pose2D::all_visible(vec![[0.0; 2]; 3]); 2], Fps::integer(30).unwrap(), topo).unwrap();
        assert!(denoise(&p, &seq).is_err());
        assert!(matches!(denoise(&p, &noisy(300)), Err(MotionError::TooLong { .. })));
    }

    #[test]
    fn pinning_restores_keyframes() {
        let mut p = small();
        let k = p.interpolator.len() - 1;
        p.interpolator[k].data_mut().iter_mut().for_each(|v| *v = 0.05);
        let seq = noisy(3);
        let clean = denoise(&p, &seq).unwrap();
        let mut up = upsample_motion(&p, &seq, 4).unwrap();
        assert_ne!(up.frames[4], clean.frames[1]);
        pin_keyframes(&mut up, &clean, 4).unwrap();
        assert_eq!(up.frames[4], clean.frames[1]);
        assert!(pin_keyframes(&mut up, &clean, 3).is_err());
    }
}
