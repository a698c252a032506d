use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("topology mismatch between operands")]
    TopologyMismatch,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("operation needs at least {need} frames, got {got}")]
    TooFewFrames { need: usize, got: usize },
    #[error("{frames} frames cannot be strided by {s}: frames - 1 must be divisible by s")]
    NotDivisible { frames: usize, s: usize },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("joint count mismatch: expected {expected}, found {found}")]
    JointCount { expected: usize, found: usize },
    #[error("frame {frame} joint {joint}: camera-space depth {depth} is at or behind the near plane {near}")]
    NearPlane {
        frame: usize,
        joint: usize,
        depth: f64,
        near: f64,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("image {width}x{height} is smaller than the required {min}x{min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
