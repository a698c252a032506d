//! Training-data simulation: 3D joint motion is projected through a sampled
//! pinhole camera, temporally downsampled and corrupted with detector-like
//! noise and joint dropout.

mod camera;
mod corrupt;
mod motion;
mod pair;
mod seed;
mod synth;

pub use camera::{project_points, project_points_with_near, sample_camera, sample_camera_looking_at, Camera, DEFAULT_NEAR};
pub use corrupt::{corrupt_sequence, CorruptionConfig};
pub use motion::MotionSample3D;
pub use pair::{make_training_pair, simulate_pair, SimulationConfig, TrainingPair};
pub use seed::derive_seed;
pub use synth::{synthesize_motion3d, SynthConfig};
