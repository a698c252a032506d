use mgvi_core::pose::PoseSequence;

use crate::{MotionError, Result};

/// Per-term losses; `total = denoise + lambda_interp * interp`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossBreakdown {
    pub denoise: f64,
    pub interp: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(denoise: f64, interp: f64, lambda_interp: f64) -> Self {
        Self {
            denoise,
            interp,
            total: denoise + lambda_interp * interp,
        }
    }
}

/// Mean absolute coordinate error over the joints visible in `gt`.
pub(crate) fn masked_l1(pred: &PoseSequence, gt: &PoseSequence) -> Result<f64> {
    if pred.len() != gt.len() {
        return Err(MotionError::DimensionMismatch {
            expected: gt.len(),
            found: pred.len(),
        });
    }
    if pred.joint_count() != gt.joint_count() {
        return Err(MotionError::DimensionMismatch {
            expected: gt.joint_count(),
            found: pred.joint_count(),
        });
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for (p, g) in pred.frames.iter().zip(&gt.frames) {
        for j in 0..g.joint_count() {
            if g.visibility[j] {
                sum += (p.coords[j][0] - g.coords[j][0]).abs() + (p.coords[j][1] - g.coords[j][1]).abs();
                count += 2;
            }
        }
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

/// Denoising and interpolation L1 terms and their weighted sum.
pub fn motion_loss(
    pred_low: &PoseSequence,
    pred_high: &PoseSequence,
    gt_low: &PoseSequence,
    gt_high: &PoseSequence,
    lambda_interp: f64,
) -> Result<LossBreakdown> {
    if !(lambda_interp >= 0.0) {
        return Err(MotionError::InvalidConfig(format!("lambda_interp {lambda_interp} must be non-negative")));
    }
    Ok(LossBreakdown::new(
        masked_l1(pred_low, gt_low)?,
        masked_l1(pred_high, gt_high)?,
        lambda_interp,
    ))
}
