//! Skeleton rasterization, human-centric masks, alpha compositing and the
//! rendering losses.

mod composite;
mod features;
mod frame;
mod losses;
mod raster;

pub use composite::{apply_mask, composite};
pub use features::{feature_extract, FeatureExtractor, GaussianPyramid};
pub use frame::synthesize_frame;
pub use losses::{image_losses, image_losses_with, ImageLossWeights, ImageLosses};
pub use raster::{human_mask_from_pose, rasterize_pose, rasterize_pose_with_coverage, RasterStyle};
