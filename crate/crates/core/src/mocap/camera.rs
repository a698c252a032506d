use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::MotionSample3D;
use crate::pose::{Pose2D, PoseSequence};
use crate::{Error, Result};

/// Default near-plane depth in meters.
pub const DEFAULT_NEAR: f64 = 0.1;

/// Pinhole camera. Camera space is x right, y down, z forward, so image
/// coordinates grow rightward and downward.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub focal_px: f64,
    pub principal_point: [f64; 2],
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
    pub image_size: (usize, usize),
}

impl Camera {
    pub fn new(
        focal_px: f64,
        principal_point: [f64; 2],
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        image_size: (usize, usize),
    ) -> Result<Self> {
        if !(focal_px > 0.0) || !focal_px.is_finite() {
            return Err(Error::InvalidArgument(format!("focal length {focal_px} must be positive")));
        }
        let deviation = (rotation * rotation.transpose() - Matrix3::identity()).abs().max();
        if deviation > 1e-6 {
            return Err(Error::InvalidArgument(format!(
                "rotation is not orthonormal (|R R^T - I| = {deviation:e})"
            )));
        }
        if image_size.0 == 0 || image_size.1 == 0 {
            return Err(Error::InvalidArgument("image size must be positive".into()));
        }
        Ok(Self {
            focal_px,
            principal_point,
            rotation,
            translation,
            image_size,
        })
    }

    /// Camera at `eye` looking at `target` with world +y as up.
    pub fn look_at(
        eye: Vector3<f64>,
        target: Vector3<f64>,
        focal_px: f64,
        principal_point: [f64; 2],
        image_size: (usize, usize),
    ) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidArgument("eye and target coincide".into()))?;
        let right = forward
            .cross(&Vector3::y())
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidArgument("view direction is vertical".into()))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        Self::new(focal_px, principal_point, rotation, translation, image_size)
    }

    pub fn to_camera(&self, world: [f64; 3]) -> Vector3<f64> {
        self.rotation * Vector3::from(world) + self.translation
    }

    /// Pixel coordinates of a camera-space point (no near-plane check).
    pub fn project_camera_point(&self, p: &Vector3<f64>) -> [f64; 2] {
        [
            self.focal_px * p.x / p.z + self.principal_point[0],
            self.focal_px * p.y / p.z + self.principal_point[1],
        ]
    }

    pub fn in_bounds(&self, uv: [f64; 2]) -> bool {
        uv[0] >= 0.0 && uv[1] >= 0.0 && uv[0] < self.image_size.0 as f64 && uv[1] < self.image_size.1 as f64
    }
}

/// Samples a camera looking at the world origin.
pub fn sample_camera(seed: u64, image_size: (usize, usize)) -> Result<Camera> {
    sample_camera_looking_at(seed, image_size, [0.0; 3])
}

/// Samples intrinsics and a viewpoint around `target`.
///
/// Focal length is uniform in `[0.8, 1.6] * width`, the principal point is the
/// image center, and the camera sits at a distance uniform in `[3, 6]` m with
/// azimuth in `[-60, 60]` deg and elevation in `[-10, 20]` deg.
pub fn sample_camera_looking_at(seed: u64, image_size: (usize, usize), target: [f64; 3]) -> Result<Camera> {
    if image_size.0 == 0 || image_size.1 == 0 {
        return Err(Error::InvalidArgument("image size must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (image_size.0 as f64, image_size.1 as f64);
    let focal = rng.random_range(0.8 * w..=1.6 * w);
    let distance = rng.random_range(3.0..=6.0);
    let azimuth = rng.random_range(-60f64..=60.0).to_radians();
    let elevation = rng.random_range(-10f64..=20.0).to_radians();
    let target = Vector3::from(target);
    let offset = Vector3::new(
        elevation.cos() * azimuth.sin(),
        elevation.sin(),
        elevation.cos() * azimuth.cos(),
    );
    Camera::look_at(target + distance * offset, target, focal, [w / 2.0, h / 2.0], image_size)
}

pub fn project_points(motion: &MotionSample3D, camera: &Camera) -> Result<PoseSequence> {
    project_points_with_near(motion, camera, DEFAULT_NEAR)
}

/// Projects every joint; joints landing outside the image are marked
/// invisible at (0, 0).
pub fn project_points_with_near(motion: &MotionSample3D, camera: &Camera, near: f64) -> Result<PoseSequence> {
    let mut frames = Vec::with_capacity(motion.len());
    for (fi, joints) in motion.frames.iter().enumerate() {
        let mut coords = Vec::with_capacity(joints.len());
        let mut visibility = Vec::with_capacity(joints.len());
        for (j, &p) in joints.iter().enumerate() {
            let c = camera.to_camera(p);
            if c.z <= near {
                return Err(Error::NearPlane {
                    frame: fi,
                    joint: j,
                    depth: c.z,
                    near,
                });
            }
            let uv = camera.project_camera_point(&c);
            if camera.in_bounds(uv) {
                coords.push(uv);
                visibility.push(true);
            } else {
                coords.push([0.0, 0.0]);
                visibility.push(false);
            }
        }
        frames.push(Pose2D { coords, visibility });
    }
    PoseSequence::new(frames, motion.fps, motion.topology.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{Fps, SkeletonTopology};
    use std::sync::Arc;

    fn identity_camera(focal: f64) -> Camera {
        Camera::new(focal, [128.0, 128.0], Matrix3::identity(), Vector3::zeros(), (256, 256)).unwrap()
    }

    fn single_joint(points: Vec<[f64; 3]>) -> MotionSample3D {
        let topo = Arc::new(SkeletonTopology::unnamed(1, vec![]).unwrap());
        MotionSample3D::new(points.into_iter().map(|p| vec![p]).collect(), Fps::integer(60).unwrap(), topo).unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let seq = project_points(&single_joint(vec![[0.0, 0.0, 5.0]]), &identity_camera(500.0)).unwrap();
        assert_eq!(seq.frames[0].coords[0], [128.0, 128.0]);
        assert!(seq.frames[0].visibility[0]);
    }

    #[test]
    fn pinhole_formula() {
        let seq = project_points(&single_joint(vec![[1.0, 0.0, 5.0]]), &identity_camera(500.0)).unwrap();
        // 500 * 1 / 5 + 128
        assert_eq!(seq.frames[0].coords[0][0], 228.0);
    }

    #[test]
    fn near_plane_rejected() {
        let err = project_points(&single_joint(vec![[0.0, 0.0, 0.05]]), &identity_camera(500.0)).unwrap_err();
        assert!(matches!(err, Error::NearPlane { frame: 0, joint: 0, .. }));
    }

    #[test]
    fn out_of_frame_is_invisible() {
        let seq = project_points(&single_joint(vec![[10.0, 0.0, 5.0]]), &identity_camera(500.0)).unwrap();
        assert!(!seq.frames[0].visibility[0]);
        assert_eq!(seq.frames[0].coords[0], [0.0, 0.0]);
    }

    #[test]
    fn sampled_cameras_are_deterministic_and_in_range() {
        let a = sample_camera(11, (256, 256)).unwrap();
        assert_eq!(a, sample_camera(11, (256, 256)).unwrap());
        assert_ne!(a, sample_camera(12, (256, 256)).unwrap());
        for seed in 0..10_000 {
            let c = sample_camera(seed, (256, 192)).unwrap();
            assert!((0.8 * 256.0..=1.6 * 256.0).contains(&c.focal_px));
            assert_eq!(c.principal_point, [128.0, 96.0]);
            let dev = (c.rotation * c.rotation.transpose() - Matrix3::identity()).abs().max();
            assert!(dev < 1e-6);
            let target = c.to_camera([0.0; 3]);
            assert!(target.x.abs() < 1e-9 && target.y.abs() < 1e-9);
            assert!((3.0 - 1e-9..=6.0 + 1e-9).contains(&target.z));
        }
    }

    #[test]
    fn look_at_keeps_up_direction() {
        let cam = Camera::look_at(Vector3::new(0.0, 1.0, 5.0), Vector3::new(0.0, 1.0, 0.0), 300.0, [128.0, 128.0], (256, 256))
            .unwrap();
        let head = cam.project_camera_point(&cam.to_camera([0.0, 1.5, 0.0]));
        let feet = cam.project_camera_point(&cam.to_camera([0.0, 0.2, 0.0]));
        assert!(head[1] < feet[1], "image y must grow downward");
        let right = cam.project_camera_point(&cam.to_camera([1.0, 1.0, 0.0]));
        assert!(right[0] > 128.0);
    }

    #[test]
    fn rejects_non_orthonormal_rotation() {
        let r = Matrix3::identity() * 1.01;
        assert!(Camera::new(500.0, [0.0, 0.0], r, Vector3::zeros(), (8, 8)).is_err());
        assert!(Camera::new(0.0, [0.0, 0.0], Matrix3::identity(), Vector3::zeros(), (8, 8)).is_err());
    }
}
