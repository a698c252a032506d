use std::sync::Arc;

use crate::pose::{Fps, SkeletonTopology};
use crate::{Error, Result};

/// High frame-rate 3D joint positions in meters (y up).
#[derive(Clone, Debug, PartialEq)]
pub struct MotionSample3D {
    pub frames: Vec<Vec<[f64; 3]>>,
    pub fps: Fps,
    pub topology: Arc<SkeletonTopology>,
}

impl MotionSample3D {
    pub fn new(frames: Vec<Vec<[f64; 3]>>, fps: Fps, topology: Arc<SkeletonTopology>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::TooFewFrames { need: 1, got: 0 });
        }
        let joints = topology.joint_count();
        for (i, f) in frames.iter().enumerate() {
            if f.len() != joints {
                return Err(Error::JointCount {
                    expected: joints,
                    found: f.len(),
                });
            }
            if f.iter().flatten().any(|v| !v.is_finite()) {
                return Err(Error::InvalidArgument(format!("frame {i} has a non-finite coordinate")));
            }
        }
        Ok(Self { frames, fps, topology })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Index of the first root joint of the topology.
    pub fn root_joint(&self) -> usize {
        self.topology.topological_order()[0]
    }

    /// Mean root position over all frames.
    pub fn root_centroid(&self) -> [f64; 3] {
        let root = self.root_joint();
        let n = self.frames.len() as f64;
        let mut acc = [0.0; 3];
        for f in &self.frames {
            for (a, v) in acc.iter_mut().zip(f[root]) {
                *a += v / n;
            }
        }
        acc
    }
}
