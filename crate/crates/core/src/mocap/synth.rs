use std::f64::consts::PI;

use nalgebra::{Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MotionSample3D;
use crate::pose::{Fps, SkeletonTopology};
use crate::{Error, Result};

/// Rest-pose joint positions of the built-in 19-joint skeleton in meters,
/// facing +z with the subject's right side at -x.
const REST_POSE: [[f64; 3]; 19] = [
    [0.0, 1.65, 0.05],    // nose
    [0.0, 1.45, 0.0],     // neck
    [-0.18, 1.45, 0.0],   // right_shoulder
    [-0.18, 1.17, 0.0],   // right_elbow
    [-0.18, 0.92, 0.0],   // right_wrist
    [0.18, 1.45, 0.0],    // left_shoulder
    [0.18, 1.17, 0.0],    // left_elbow
    [0.18, 0.92, 0.0],    // left_wrist
    [0.0, 0.95, 0.0],     // mid_hip
    [-0.10, 0.95, 0.0],   // right_hip
    [-0.10, 0.52, 0.0],   // right_knee
    [-0.10, 0.10, 0.0],   // right_ankle
    [0.10, 0.95, 0.0],    // left_hip
    [0.10, 0.52, 0.0],    // left_knee
    [0.10, 0.10, 0.0],    // left_ankle
    [-0.035, 1.69, 0.04], // right_eye
    [0.035, 1.69, 0.04],  // left_eye
    [-0.075, 1.67, 0.0],  // right_ear
    [0.075, 1.67, 0.0],   // left_ear
];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthConfig {
    pub duration_frames: usize,
    pub fps: Fps,
    /// Sines summed per joint angle; 0 gives a rigid translating skeleton.
    pub harmonics: usize,
    /// Upper bound on sine frequencies; defaults to `min(fps / 8, 2.5)` Hz.
    pub max_freq_hz: Option<f64>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            duration_frames: 65,
            fps: Fps::integer(60).expect("positive"),
            harmonics: 3,
            max_freq_hz: None,
        }
    }
}

impl SynthConfig {
    pub fn max_freq(&self) -> f64 {
        self.max_freq_hz.unwrap_or_else(|| (self.fps.as_f64() / 8.0).min(2.5))
    }
}

struct Sines {
    terms: Vec<(f64, f64, f64)>,
}

impl Sines {
    fn sample(rng: &mut ChaCha8Rng, harmonics: usize, max_amp: f64, max_freq: f64) -> Self {
        let min_freq = 0.2f64.min(max_freq);
        let terms = (0..harmonics)
            .map(|_| {
                let amp = rng.random_range(0.0..=max_amp);
                let freq = rng.random_range(min_freq..=max_freq);
                let phase = rng.random_range(0.0..2.0 * PI);
                (amp, freq, phase)
            })
            .collect();
        Self { terms }
    }

    fn at(&self, t: f64) -> f64 {
        self.terms.iter().map(|&(a, f, p)| a * (2.0 * PI * f * t + p).sin()).sum()
    }
}

/// Generates a band-limited synthetic motion of the built-in skeleton.
///
/// Each bone keeps its rest vector rotated by two time-varying angles (a
/// sum of sines per angle), so bone lengths are preserved exactly up to
/// rounding. The whole body gets a constant random heading and a constant
/// velocity root translation centered on the middle frame.
pub fn synthesize_motion3d(seed: u64, cfg: &SynthConfig) -> Result<MotionSample3D> {
    if cfg.duration_frames < 2 {
        return Err(Error::TooFewFrames {
            need: 2,
            got: cfg.duration_frames,
        });
    }
    let max_freq = cfg.max_freq();
    if !(max_freq > 0.0) || !max_freq.is_finite() {
        return Err(Error::InvalidArgument(format!("max frequency {max_freq} must be positive")));
    }
    let topology = SkeletonTopology::body19();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let heading = rng.random_range(-PI..PI);
    let speed = rng.random_range(0.0..=0.4);
    let direction = rng.random_range(-PI..PI);
    let velocity = Vector3::new(speed * direction.cos(), 0.0, speed * direction.sin());

    let amp_budget = if cfg.harmonics == 0 { 0.0 } else { 0.9 / cfg.harmonics as f64 };
    let angles: Vec<[Sines; 2]> = topology
        .edges()
        .iter()
        .map(|_| {
            [
                Sines::sample(&mut rng, cfg.harmonics, amp_budget, max_freq),
                Sines::sample(&mut rng, cfg.harmonics, amp_budget * 0.5, max_freq),
            ]
        })
        .collect();

    let order = topology.topological_order();
    let parents = topology.parents();
    let mut edge_of = vec![usize::MAX; topology.joint_count()];
    for (e, &(_, c)) in topology.edges().iter().enumerate() {
        edge_of[c] = e;
    }
    let yaw = Rotation3::from_axis_angle(&Vector3::y_axis(), heading);
    let mid = (cfg.duration_frames - 1) as f64 / 2.0;
    let dt = 1.0 / cfg.fps.as_f64();

    let mut frames = Vec::with_capacity(cfg.duration_frames);
    for f in 0..cfg.duration_frames {
        let t = f as f64 * dt;
        let mut local = vec![Vector3::zeros(); topology.joint_count()];
        for &j in &order {
            local[j] = match parents[j] {
                None => Vector3::from(REST_POSE[j]),
                Some(p) => {
                    let rest = Vector3::from(REST_POSE[j]) - Vector3::from(REST_POSE[p]);
                    let [a, b] = &angles[edge_of[j]];
                    let r = Rotation3::from_axis_angle(&Vector3::x_axis(), a.at(t))
                        * Rotation3::from_axis_angle(&Vector3::z_axis(), b.at(t));
                    local[p] + r * rest
                }
            };
        }
        let shift = velocity * ((f as f64 - mid) * dt);
        frames.push(local.iter().map(|p| (yaw * p + shift).into()).collect());
    }
    MotionSample3D::new(frames, cfg.fps, topology)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bone_lengths(frame: &[[f64; 3]], topo: &SkeletonTopology) -> Vec<f64> {
        topo.edges()
            .iter()
            .map(|&(p, c)| (Vector3::from(frame[p]) - Vector3::from(frame[c])).norm())
            .collect()
    }

    #[test]
    fn bone_lengths_are_constant() {
        for seed in 0..20 {
            let m = synthesize_motion3d(seed, &SynthConfig::default()).unwrap();
            let first = bone_lengths(&m.frames[0], &m.topology);
            for f in &m.frames {
                for (a, b) in bone_lengths(f, &m.topology).iter().zip(&first) {
                    assert!((a - b).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn rest_bones_match_rest_pose() {
        let m = synthesize_motion3d(1, &SynthConfig::default()).unwrap();
        let rest: Vec<[f64; 3]> = REST_POSE.to_vec();
        let expected = bone_lengths(&rest, &m.topology);
        for (a, b) in bone_lengths(&m.frames[10], &m.topology).iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_harmonics_is_rigid_translation() {
        let cfg = SynthConfig {
            harmonics: 0,
            ..SynthConfig::default()
        };
        let m = synthesize_motion3d(4, &cfg).unwrap();
        let step = |f: usize, j: usize, k: usize| m.frames[f + 1][j][k] - m.frames[f][j][k];
        for f in 0..m.len() - 1 {
            for j in 0..19 {
                for k in 0..3 {
                    assert!((step(f, j, k) - step(0, 0, k)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let cfg = SynthConfig::default();
        assert_eq!(synthesize_motion3d(9, &cfg).unwrap(), synthesize_motion3d(9, &cfg).unwrap());
        assert_ne!(synthesize_motion3d(9, &cfg).unwrap(), synthesize_motion3d(10, &cfg).unwrap());
    }

    #[test]
    fn rejects_short_duration() {
        let cfg = SynthConfig {
            duration_frames: 1,
            ..SynthConfig::default()
        };
        assert!(synthesize_motion3d(0, &cfg).is_err());
    }

    #[test]
    fn default_frequency_cap() {
        assert_eq!(SynthConfig::default().max_freq(), 2.5);
        let slow = SynthConfig {
            fps: Fps::integer(8).unwrap(),
            ..SynthConfig::default()
        };
        assert_eq!(slow.max_freq(), 1.0);
    }
}
