//! 2D pose sequences and the analytic interpolation baselines.

mod format;
mod interp;
mod sequence;
mod topology;
mod validate;

pub use format::{
    parse_motion3d, parse_sequence, read_motion3d, read_sequence, read_sequence_with, render_motion3d,
    render_sequence, write_motion3d, write_sequence,
};
pub use interp::{downsample, lerp_pose, upsample_linear, upsample_quadratic};
pub use sequence::{Fps, Pose2D, PoseSequence};
pub use topology::SkeletonTopology;
pub use validate::{validate_sequence, Issue, IssueCode, ValidationReport};
