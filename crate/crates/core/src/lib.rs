//! Core data model and non-learned pipeline stages: 2D pose sequences and
//! their analytic upsampling baselines, training-data simulation from 3D
//! joint motion, pose-conditioned compositing with its losses, and quality
//! metrics.

pub mod error;
pub mod image;
pub mod metrics;
pub mod mocap;
pub mod pose;
pub mod render;

pub use error::{Error, Result};
