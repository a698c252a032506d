use mgvi_core::mocap::CorruptionConfig;

use crate::{MotionError, Result};

/// Shape of each of the two transformer encoders.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransformerConfig {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub d_ff: usize,
    pub dropout: f64,
    pub max_len: usize,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        Self {
            d_model: 128,
            heads: 8,
            layers: 4,
            d_ff: 256,
            dropout: 0.1,
            max_len: 256,
        }
    }
}

impl TransformerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MotionError::InvalidConfig(msg));
        if self.d_model == 0 || self.heads == 0 || self.layers == 0 || self.d_ff == 0 || self.max_len == 0 {
            return bad(format!("all dimensions must be positive: {self:?}"));
        }
        if !self.d_model.is_multiple_of(self.heads) {
            return bad(format!("d_model {} is not divisible by heads {}", self.d_model, self.heads));
        }
        if !self.d_model.is_multiple_of(2) {
            return bad(format!("d_model {} must be even for the positional encoding", self.d_model));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0, 1)", self.dropout));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }
}

/// Optimizer and schedule settings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lambda_interp: f64,
    pub seed: u64,
    pub s: usize,
    /// Linear ramp from 0 to `lr` over this many optimizer steps.
    pub warmup_steps: usize,
    /// Cosine decay of the step size to zero by the final step.
    pub cosine_decay: bool,
    /// When set, every epoch replaces each pair's noisy keyframes with a
    /// fresh corruption of its clean keyframes.
    pub augment: Option<CorruptionConfig>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 8,
            epochs: 30,
            lambda_interp: 1.0,
            seed: 0,
            s: 8,
            warmup_steps: 0,
            cosine_decay: false,
            augment: None,
        }
    }
}

impl TrainConfig {
    /// Step size at optimizer step `step` (0-based) of `total`.
    pub fn lr_at(&self, step: usize, total: usize) -> f64 {
        let mut lr = self.lr;
        if step < self.warmup_steps {
            lr *= (step + 1) as f64 / self.warmup_steps as f64;
        }
        if self.cosine_decay && total > 0 {
            let t = step as f64 / total as f64;
            lr *= 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
        }
        lr
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(MotionError::InvalidConfig(msg));
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad(format!("lr {} must be non-negative", self.lr));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if !(self.adam_eps > 0.0) {
            return bad("adam_eps must be positive".into());
        }
        if self.batch_size == 0 || self.epochs == 0 || self.s == 0 {
            return bad("batch_size, epochs and s must be positive".into());
        }
        if !(self.lambda_interp >= 0.0) || !self.lambda_interp.is_finite() {
            return bad(format!("lambda_interp {} must be non-negative", self.lambda_interp));
        }
        if let Some(c) = &self.augment {
            c.validate()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TransformerConfig::default().validate().unwrap();
        TrainConfig::default().validate().unwrap();
        assert_eq!(TransformerConfig::default().head_dim(), 16);
    }

    #[test]
    fn rejects_bad_shapes() {
        let cfg = TransformerConfig {
            heads: 3,
            ..TransformerConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TransformerConfig {
            dropout: 1.0,
            ..TransformerConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig {
            lambda_interp: -1.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn schedule() {
        let cfg = TrainConfig {
            lr: 1.0,
            warmup_steps: 4,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.lr_at(0, 100), 0.25);
        assert_eq!(cfg.lr_at(3, 100), 1.0);
        assert_eq!(cfg.lr_at(50, 100), 1.0);
        let cfg = TrainConfig {
            lr: 1.0,
            cosine_decay: true,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.lr_at(0, 100), 1.0);
        assert!((cfg.lr_at(50, 100) - 0.5).abs() < 1e-12);
        assert!(cfg.lr_at(99, 100) < 1e-3);
    }
}
