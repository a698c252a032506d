use super::{corrupt_sequence, derive_seed, project_points, sample_camera_looking_at, synthesize_motion3d};
use super::{Camera, CorruptionConfig, MotionSample3D, SynthConfig};
use crate::pose::{downsample, PoseSequence};
use crate::{Error, Result};

/// Clean high-rate ground truth, its keyframes, and their corrupted version.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingPair {
    pub gt_high: PoseSequence,
    pub gt_low: PoseSequence,
    pub noisy_low: PoseSequence,
    pub s: usize,
}

pub fn make_training_pair(
    motion: &MotionSample3D,
    camera: &Camera,
    s: usize,
    cfg: &CorruptionConfig,
) -> Result<TrainingPair> {
    if s == 0 {
        return Err(Error::InvalidArgument("s must be positive".into()));
    }
    if !(motion.len() - 1).is_multiple_of(s) {
        return Err(Error::NotDivisible { frames: motion.len(), s });
    }
    let gt_high = project_points(motion, camera)?;
    let gt_low = downsample(&gt_high, s)?;
    let noisy_low = corrupt_sequence(&gt_low, cfg)?;
    Ok(TrainingPair {
        gt_high,
        gt_low,
        noisy_low,
        s,
    })
}

/// End-to-end settings for simulating one pair from a seed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimulationConfig {
    pub synth: SynthConfig,
    pub s: usize,
    pub image_size: (usize, usize),
    /// The seed field is overridden per pair.
    pub corruption: CorruptionConfig,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            s: 8,
            image_size: (256, 256),
            corruption: CorruptionConfig::default(),
        }
    }
}

/// Simulates a pair with motion, camera and corruption seeds split from
/// `seed`. The camera looks at the mean root position of the motion.
pub fn simulate_pair(seed: u64, cfg: &SimulationConfig) -> Result<TrainingPair> {
    let motion = synthesize_motion3d(derive_seed(seed, 0), &cfg.synth)?;
    let camera = sample_camera_looking_at(derive_seed(seed, 1), cfg.image_size, motion.root_centroid())?;
    let corruption = CorruptionConfig {
        seed: derive_seed(seed, 2),
        ..cfg.corruption
    };
    make_training_pair(&motion, &camera, cfg.s, &corruption)
}
