use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_rational::Ratio;

use super::SkeletonTopology;
use crate::{Error, Result};

/// Frame rate as a positive rational, so 7.5 FPS is exactly `15/2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Fps(Ratio<u32>);

impl Fps {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::InvalidArgument(format!("fps {num}/{den} must be positive")));
        }
        Ok(Self(Ratio::new(num, den)))
    }

    pub fn integer(fps: u32) -> Result<Self> {
        Self::new(fps, 1)
    }

    pub fn numer(&self) -> u32 {
        *self.0.numer()
    }

    pub fn denom(&self) -> u32 {
        *self.0.denom()
    }

    pub fn as_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    pub fn times(&self, s: u32) -> Self {
        Self(self.0 * Ratio::from_integer(s))
    }

    pub fn divided_by(&self, s: u32) -> Self {
        Self(self.0 / Ratio::from_integer(s))
    }
}

impl fmt::Display for Fps {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.numer(), self.denom())
    }
}

impl FromStr for Fps {
    type Err = Error;

    /// Accepts `num/den` or a bare integer.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("invalid fps `{s}`"));
        match s.split_once('/') {
            Some((n, d)) => Self::new(n.trim().parse().map_err(|_| bad())?, d.trim().parse().map_err(|_| bad())?),
            None => Self::integer(s.trim().parse().map_err(|_| bad())?),
        }
    }
}

/// One frame of 2D joints in pixels with per-joint visibility.
#[derive(Clone, Debug, PartialEq)]
pub struct Pose2D {
    pub coords: Vec<[f64; 2]>,
    pub visibility: Vec<bool>,
}

impl Pose2D {
    pub fn new(coords: Vec<[f64; 2]>, visibility: Vec<bool>) -> Result<Self> {
        if coords.len() != visibility.len() {
            return Err(Error::JointCount {
                expected: coords.len(),
                found: visibility.len(),
            });
        }
        Ok(Self { coords, visibility })
    }

    pub fn all_visible(coords: Vec<[f64; 2]>) -> Self {
        let visibility = vec![true; coords.len()];
        Self { coords, visibility }
    }

    pub fn invisible(joints: usize) -> Self {
        Self {
            coords: vec![[0.0, 0.0]; joints],
            visibility: vec![false; joints],
        }
    }

    pub fn joint_count(&self) -> usize {
        self.coords.len()
    }

    /// Zeroes the coordinates of every invisible joint.
    pub fn canonicalize(&mut self) {
        for (c, &v) in self.coords.iter_mut().zip(&self.visibility) {
            if !v {
                *c = [0.0, 0.0];
            }
        }
    }

    pub fn visible_count(&self) -> usize {
        self.visibility.iter().filter(|&&v| v).count()
    }
}

/// Ordered frames sharing one topology and frame rate.
#[derive(Clone, Debug, PartialEq)]
pub struct PoseSequence {
    pub frames: Vec<Pose2D>,
    pub fps: Fps,
    pub topology: Arc<SkeletonTopology>,
}

impl PoseSequence {
    pub fn new(frames: Vec<Pose2D>, fps: Fps, topology: Arc<SkeletonTopology>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::TooFewFrames { need: 1, got: 0 });
        }
        let joints = topology.joint_count();
        if let Some(bad) = frames.iter().find(|f| f.joint_count() != joints || f.visibility.len() != joints) {
            return Err(Error::JointCount {
                expected: joints,
                found: bad.joint_count(),
            });
        }
        Ok(Self { frames, fps, topology })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn joint_count(&self) -> usize {
        self.topology.joint_count()
    }

    /// Same sequence with every joint marked visible.
    pub fn with_all_visible(&self) -> Self {
        let mut out = self.clone();
        for f in &mut out.frames {
            f.visibility.iter_mut().for_each(|v| *v = true);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fps_arithmetic_is_exact() {
        let fps = Fps::integer(60).unwrap();
        let low = fps.divided_by(8);
        assert_eq!((low.numer(), low.denom()), (15, 2));
        assert_eq!(low.as_f64(), 7.5);
        assert_eq!(low.times(8), fps);
        assert_eq!("15/2".parse::<Fps>().unwrap(), low);
        assert_eq!("30".parse::<Fps>().unwrap(), Fps::integer(30).unwrap());
        assert!(Fps::new(0, 1).is_err());
        assert!("x/2".parse::<Fps>().is_err());
    }

    #[test]
    fn sequence_rejects_empty_and_mismatched() {
        let topo = SkeletonTopology::body19();
        let fps = Fps::integer(30).unwrap();
        assert!(PoseSequence::new(vec![], fps, topo.clone()).is_err());
        assert!(PoseSequence::new(vec![Pose2D::invisible(18)], fps, topo.clone()).is_err());
        assert!(PoseSequence::new(vec![Pose2D::invisible(19)], fps, topo).is_ok());
    }
}
