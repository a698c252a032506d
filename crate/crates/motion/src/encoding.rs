use std::sync::Arc;

use mgvi_autodiff::Tensor;
use mgvi_core::pose::{Fps, Pose2D, PoseSequence, SkeletonTopology};

use crate::{MotionError, Result};

fn check_size(image_size: (usize, usize)) -> Result<(f64, f64)> {
    if image_size.0 == 0 || image_size.1 == 0 {
        return Err(MotionError::InvalidConfig(format!("image size {image_size:?} must be positive")));
    }
    Ok((image_size.0 as f64, image_size.1 as f64))
}

/// Encodes frames as `[T, 3J]` rows of `(x, y, visibility)` triples with
/// pixel coordinates mapped affinely onto `[-1, 1]`.
pub fn encode_sequence(seq: &PoseSequence, image_size: (usize, usize)) -> Result<Tensor> {
    let (w, h) = check_size(image_size)?;
    let j = seq.joint_count();
    let mut data = Vec::with_capacity(seq.len() * 3 * j);
    for frame in &seq.frames {
        for (c, &v) in frame.coords.iter().zip(&frame.visibility) {
            data.extend([2.0 * c[0] / w - 1.0, 2.0 * c[1] / h - 1.0, if v { 1.0 } else { 0.0 }]);
        }
    }
    Ok(Tensor::new(vec![seq.len(), 3 * j], data)?)
}

/// Inverse of [`encode_sequence`]; visibility is thresholded at 0.5 and
/// invisible joints are placed at (0, 0).
pub fn decode_sequence(
    t: &Tensor,
    fps: Fps,
    topology: Arc<SkeletonTopology>,
    image_size: (usize, usize),
) -> Result<PoseSequence> {
    let (w, h) = check_size(image_size)?;
    let j = topology.joint_count();
    let found = t.shape().last().copied().unwrap_or(0);
    if t.rank() != 2 || found != 3 * j {
        return Err(MotionError::DimensionMismatch { expected: 3 * j, found });
    }
    let frames = t
        .data()
        .chunks(3 * j)
        .map(|row| {
            let mut coords = Vec::with_capacity(j);
            let mut visibility = Vec::with_capacity(j);
            for triple in row.chunks(3) {
                let vis = triple[2] >= 0.5;
                visibility.push(vis);
                coords.push(if vis {
                    [(triple[0] + 1.0) * w / 2.0, (triple[1] + 1.0) * h / 2.0]
                } else {
                    [0.0, 0.0]
                });
            }
            Pose2D { coords, visibility }
        })
        .collect();
    Ok(PoseSequence::new(frames, fps, topology)?)
}

/// Sinusoidal position table: `sin(t / 10000^(2i/d))` in even columns and
/// the matching cosine in odd columns.
pub fn positional_encoding(length: usize, d_model: usize) -> Result<Tensor> {
    if !d_model.is_multiple_of(2) {
        return Err(MotionError::InvalidConfig(format!("d_model {d_model} must be even")));
    }
    Ok(Tensor::from_fn(&[length, d_model], |idx| {
        let (t, c) = (idx / d_model, idx % d_model);
        let angle = t as f64 / 10000f64.powf((c - c % 2) as f64 / d_model as f64);
        if c % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sequence() -> PoseSequence {
        let topo = SkeletonTopology::body19();
        let frames = (0..4)
            .map(|t| {
                let mut p = Pose2D::all_visible((0..19).map(|j| [3.7 * j as f64 + t as f64, 200.0 - 1.3 * j as f64]).collect());
                p.visibility[t] = false;
                p.coords[t] = [0.0, 0.0];
                p
            })
            .collect();
        PoseSequence::new(frames, Fps::integer(30).unwrap(), topo).unwrap()
    }

    #[test]
    fn round_trip() {
        let seq = sequence();
        let enc = encode_sequence(&seq, (256, 256)).unwrap();
        assert_eq!(enc.shape(), &[4, 57]);
        let dec = decode_sequence(&enc, seq.fps, seq.topology.clone(), (256, 256)).unwrap();
        assert_eq!(dec.frames.len(), 4);
        for (a, b) in dec.frames.iter().zip(&seq.frames) {
            assert_eq!(a.visibility, b.visibility);
            for (p, q) in a.coords.iter().zip(&b.coords) {
                assert!((p[0] - q[0]).abs() < 1e-9 && (p[1] - q[1]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn invisible_origin_encodes_to_corner() {
        let enc = encode_sequence(&sequence(), (256, 256)).unwrap();
        assert_eq!(&enc.data()[..3], &[-1.0, -1.0, 0.0]);
    }

    #[test]
    fn decode_rejects_wrong_width() {
        let t = Tensor::zeros(&[2, 56]);
        let err = decode_sequence(&t, Fps::integer(30).unwrap(), SkeletonTopology::body19(), (256, 256));
        assert!(matches!(err, Err(MotionError::DimensionMismatch { expected: 57, found: 56 })));
    }

    #[test]
    fn positional_table() {
        let pe = positional_encoding(5, 8).unwrap();
        assert_eq!(pe.shape(), &[5, 8]);
        assert_eq!(&pe.data()[..8], &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert!((pe.data()[8] - 0.841471).abs() < 1e-6);
        assert!(pe.data().iter().all(|v| v.abs() <= 1.0));
        assert!(positional_encoding(5, 7).is_err());
    }
}
