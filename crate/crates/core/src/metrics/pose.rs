use crate::pose::PoseSequence;
use crate::{Error, Result};

/// Per-joint `|dx| + |dy|` statistics in pixels over ground-truth-visible joints.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseMetricReport {
    pub avg_l1: f64,
    pub max_l1: f64,
    /// Mean error of each frame; 0 for frames without visible joints.
    pub per_frame: Vec<f64>,
}

/// Compares `pred` against `gt`. Prediction visibility is ignored: a joint the
/// prediction dropped is scored at its canonical (0, 0).
pub fn pose_l1(pred: &PoseSequence, gt: &PoseSequence) -> Result<PoseMetricReport> {
    if pred.len() != gt.len() {
        return Err(Error::ShapeMismatch(format!("{} predicted frames vs {} ground truth", pred.len(), gt.len())));
    }
    if pred.topology.edges() != gt.topology.edges() || pred.joint_count() != gt.joint_count() {
        return Err(Error::TopologyMismatch);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    let mut max_l1 = 0.0f64;
    let mut per_frame = Vec::with_capacity(gt.len());
    for (p, g) in pred.frames.iter().zip(&gt.frames) {
        let mut frame_sum = 0.0;
        let mut frame_count = 0usize;
        for j in 0..g.joint_count() {
            if !g.visibility[j] {
                continue;
            }
            let e = (p.coords[j][0] - g.coords[j][0]).abs() + (p.coords[j][1] - g.coords[j][1]).abs();
            frame_sum += e;
            frame_count += 1;
            max_l1 = max_l1.max(e);
        }
        sum += frame_sum;
        count += frame_count;
        per_frame.push(if frame_count > 0 { frame_sum / frame_count as f64 } else { 0.0 });
    }
    if count == 0 {
        return Err(Error::InvalidArgument("ground truth has no visible joints".into()));
    }
    Ok(PoseMetricReport {
        avg_l1: sum / count as f64,
        max_l1,
        per_frame,
    })
}

/// Set-level summary: the mean of per-sequence averages and the mean of
/// per-sequence maxima.
pub fn aggregate_pose_reports(reports: &[PoseMetricReport]) -> Result<(f64, f64)> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("no reports to aggregate".into()));
    }
    let n = reports.len() as f64;
    Ok((
        reports.iter().map(|r| r.avg_l1).sum::<f64>() / n,
        reports.iter().map(|r| r.max_l1).sum::<f64>() / n,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{Fps, Pose2D, SkeletonTopology};

    fn seq(offset: f64) -> PoseSequence {
        let frames = (0..3)
            .map(|t| Pose2D::all_visible((0..19).map(|j| [j as f64 + offset, t as f64 + offset]).collect()))
            .collect();
        PoseSequence::new(frames, Fps::integer(30).unwrap(), SkeletonTopology::body19()).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let r = pose_l1(&seq(0.0), &seq(0.0)).unwrap();
        assert_eq!((r.avg_l1, r.max_l1), (0.0, 0.0));
        assert_eq!(r.per_frame, vec![0.0; 3]);
    }

    #[test]
    fn uniform_offset() {
        let r = pose_l1(&seq(1.0), &seq(0.0)).unwrap();
        assert_eq!((r.avg_l1, r.max_l1), (2.0, 2.0));
    }

    #[test]
    fn only_gt_visible_joints_count() {
        let mut gt = seq(0.0);
        gt.frames[0].visibility[0] = false;
        gt.frames[0].coords[0] = [0.0, 0.0];
        let mut pred = seq(0.0);
        pred.frames[0].coords[0] = [100.0, 100.0];
        assert_eq!(pose_l1(&pred, &gt).unwrap().max_l1, 0.0);
    }

    #[test]
    fn mismatches() {
        let mut short = seq(0.0);
        short.frames.pop();
        assert!(pose_l1(&short, &seq(0.0)).is_err());
        assert!(aggregate_pose_reports(&[]).is_err());
    }
}
