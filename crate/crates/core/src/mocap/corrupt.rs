use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::pose::PoseSequence;
use crate::{Error, Result};

/// Detector-like corruption applied to a clean 2D sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorruptionConfig {
    pub noise_sigma_px: f64,
    pub perturb_prob: f64,
    pub dropout_prob: f64,
    pub seed: u64,
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        Self {
            noise_sigma_px: 3.0,
            perturb_prob: 0.1,
            dropout_prob: 0.05,
            seed: 0,
        }
    }
}

impl CorruptionConfig {
    /// Configuration that leaves sequences untouched.
    pub fn none() -> Self {
        Self {
            noise_sigma_px: 0.0,
            perturb_prob: 0.0,
            dropout_prob: 0.0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_sigma_px >= 0.0) || !self.noise_sigma_px.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "noise sigma {} must be non-negative",
                self.noise_sigma_px
            )));
        }
        for (name, p) in [("perturb_prob", self.perturb_prob), ("dropout_prob", self.dropout_prob)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} {p} outside [0, 1]")));
            }
        }
        Ok(())
    }
}

/// Perturbs then drops joints independently per joint and frame.
///
/// Every joint consumes the same four draws (perturb coin, two normals,
/// dropout coin) regardless of outcome, so changing one probability does not
/// reshuffle the randomness of the others. Joints that are already invisible
/// stay invisible and unperturbed.
pub fn corrupt_sequence(seq: &PoseSequence, cfg: &CorruptionConfig) -> Result<PoseSequence> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut out = seq.clone();
    for frame in &mut out.frames {
        for (c, v) in frame.coords.iter_mut().zip(frame.visibility.iter_mut()) {
            let u1: f64 = rng.random();
            let nx: f64 = rng.sample(StandardNormal);
            let ny: f64 = rng.sample(StandardNormal);
            let u2: f64 = rng.random();
            if !*v {
                continue;
            }
            if u1 < cfg.perturb_prob {
                c[0] += cfg.noise_sigma_px * nx;
                c[1] += cfg.noise_sigma_px * ny;
            }
            if u2 < cfg.dropout_prob {
                *v = false;
                *c = [0.0, 0.0];
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{Fps, Pose2D, SkeletonTopology};

    fn grid(frames: usize) -> PoseSequence {
        let frames = (0..frames)
            .map(|t| Pose2D::all_visible((0..19).map(|j| [10.0 + j as f64 * 5.0, 20.0 + t as f64]).collect()))
            .collect();
        PoseSequence::new(frames, Fps::integer(60).unwrap(), SkeletonTopology::body19()).unwrap()
    }

    #[test]
    fn zero_config_is_identity() {
        let seq = grid(5);
        assert_eq!(corrupt_sequence(&seq, &CorruptionConfig::none()).unwrap(), seq);
    }

    #[test]
    fn full_dropout() {
        let cfg = CorruptionConfig {
            dropout_prob: 1.0,
            ..CorruptionConfig::default()
        };
        let out = corrupt_sequence(&grid(4), &cfg).unwrap();
        for f in &out.frames {
            assert_eq!(f.visible_count(), 0);
            assert!(f.coords.iter().all(|c| *c == [0.0, 0.0]));
        }
    }

    #[test]
    fn gaussian_mean_absolute_deviation() {
        let cfg = CorruptionConfig {
            noise_sigma_px: 2.0,
            perturb_prob: 1.0,
            dropout_prob: 0.0,
            seed: 99,
        };
        // 5264 frames * 19 joints > 1e5
        let seq = grid(5264);
        let out = corrupt_sequence(&seq, &cfg).unwrap();
        let mut acc = 0.0;
        let mut n = 0usize;
        for (a, b) in seq.frames.iter().zip(&out.frames) {
            for (p, q) in a.coords.iter().zip(&b.coords) {
                acc += (p[0] - q[0]).abs() + (p[1] - q[1]).abs();
                n += 2;
            }
        }
        let expected = 2.0 * (2.0 / std::f64::consts::PI).sqrt();
        assert!(((acc / n as f64) - expected).abs() < 0.05 * expected);
    }

    #[test]
    fn dropout_fraction_within_three_sigma() {
        let p = 0.05;
        let cfg = CorruptionConfig {
            dropout_prob: p,
            seed: 3,
            ..CorruptionConfig::default()
        };
        let seq = grid(2000);
        let out = corrupt_sequence(&seq, &cfg).unwrap();
        let n = (2000 * 19) as f64;
        let dropped = out.frames.iter().map(|f| 19 - f.visible_count()).sum::<usize>() as f64;
        assert!((dropped / n - p).abs() <= 3.0 * (p * (1.0 - p) / n).sqrt());
    }

    #[test]
    fn deterministic_and_shape_preserving() {
        let seq = grid(9);
        let cfg = CorruptionConfig {
            seed: 5,
            ..CorruptionConfig::default()
        };
        let a = corrupt_sequence(&seq, &cfg).unwrap();
        assert_eq!(a, corrupt_sequence(&seq, &cfg).unwrap());
        assert_eq!((a.len(), a.fps), (seq.len(), seq.fps));
        assert_eq!(a.topology, seq.topology);
        let other = corrupt_sequence(&seq, &CorruptionConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn rejects_bad_probabilities() {
        let cfg = CorruptionConfig {
            dropout_prob: 1.5,
            ..CorruptionConfig::default()
        };
        assert!(corrupt_sequence(&grid(2), &cfg).is_err());
        let cfg = CorruptionConfig {
            noise_sigma_px: -1.0,
            ..CorruptionConfig::default()
        };
        assert!(corrupt_sequence(&grid(2), &cfg).is_err());
    }
}
