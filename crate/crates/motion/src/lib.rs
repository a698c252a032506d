//! Residual transformer motion model.
//!
//! A denoiser corrects noisy, incomplete low-rate 2D pose sequences; after
//! linear upsampling an interpolator adds the non-linear motion component.
//! Both predict residuals in normalized image units, so zero output
//! projections leave their inputs untouched.

mod checkpoint;
mod config;
mod encoding;
mod error;
mod loss;
mod network;
mod params;
mod pipeline;
mod train;

pub use checkpoint::{decode_params, encode_params, load_params, load_params_with, save_params};
pub use config::{TrainConfig, TransformerConfig};
pub use encoding::{decode_sequence, encode_sequence, positional_encoding};
pub use error::{MotionError, Result};
pub use loss::{motion_loss, LossBreakdown};
pub use network::attention;
pub use params::{network_specs, MotionModelParams, ParamSpec};
pub use pipeline::{denoise, interpolate, pin_keyframes, upsample_motion};
pub use train::{loss_grad_check, train, train_from};
