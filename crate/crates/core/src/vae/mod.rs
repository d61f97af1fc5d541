//! Point-cloud autoencoder: a PointNet-style encoder (pointwise convolutions
//! and a global max pool) into a small latent space, an upsampling
//! convolutional decoder, the matching-based reconstruction loss, the
//! kernel MMD latent loss, and the training loop.

mod loss;
mod model;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use loss::{
    emd_loss, emd_loss_with_sigma, gaussian_kernel, mmd_loss, EmdLoss, LatentBatch, MmdLoss,
    EVAL_EPS_REL, TRAIN_EPS_REL,
};
pub use model::{ParamSpec, Vae};
pub use train::{reconstruction_loss, train, train_with, EpochLog, TrainOutcome, TrainingLog};

use crate::assignment::AssignmentError;
use crate::nn::NnError;

#[derive(Debug, Error)]
pub enum VaeError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("expected {expected} points, got {got}")]
    PointCount { expected: usize, got: usize },
    #[error("expected latent of length {expected}, got {got}")]
    LatentDim { expected: usize, got: usize },
    #[error("dataset too small: {0}")]
    DatasetTooSmall(String),
    #[error("non-finite loss at epoch {epoch}, batch {batch}: L_r = {lr}, L_l = {ll}")]
    NonFinite {
        epoch: usize,
        batch: usize,
        lr: f64,
        ll: f64,
    },
    #[error("checkpoint does not match the architecture: {0}")]
    Checkpoint(String),
    #[error("latent batch needs at least 2 samples, got {0}")]
    BatchTooSmall(usize),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Assignment(#[from] AssignmentError),
}

/// Model and training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VaeConfig {
    pub n_points: usize,
    pub latent_dim: usize,
    /// Scales every channel count of the reference architecture.
    pub width_mult: f64,
    pub batch_size: usize,
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Target latent distribution is Uniform[-bound, bound]^d.
    pub uniform_bound: f64,
    pub val_frac: f64,
    /// Auction `eps_final` during training, relative to the mean pair cost.
    pub train_eps_rel: f64,
}

impl Default for VaeConfig {
    fn default() -> Self {
        Self {
            n_points: 10_000,
            latent_dim: 3,
            width_mult: 1.0,
            batch_size: 16,
            lr: 1e-4,
            max_epochs: 100,
            patience: 10,
            seed: 0,
            uniform_bound: 1.0,
            val_frac: 0.1,
            train_eps_rel: TRAIN_EPS_REL,
        }
    }
}

impl VaeConfig {
    /// Small profile that trains on a desktop CPU: 256 points, 1/16 width.
    pub fn desk() -> Self {
        Self {
            n_points: 256,
            width_mult: 1.0 / 16.0,
            ..Self::default()
        }
    }

    /// Channel count for a reference width, never below 1.
    pub fn channels(&self, reference: usize) -> usize {
        ((reference as f64 * self.width_mult).round() as usize).max(1)
    }

    /// Rows produced by the decoder's dense stage before upsampling.
    pub fn base_rows(&self) -> usize {
        self.n_points.div_ceil(10)
    }

    pub fn validate(&self) -> Result<(), VaeError> {
        let bad = |m: &str| Err(VaeError::Config(m.to_string()));
        if self.n_points == 0 {
            return bad("n_points must be >= 1");
        }
        if self.latent_dim == 0 {
            return bad("latent_dim must be >= 1");
        }
        if !(self.width_mult > 0.0 && self.width_mult <= 1.0) {
            return bad("width_mult must be in (0, 1]");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be >= 2");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr must be positive");
        }
        if !(self.uniform_bound > 0.0 && self.uniform_bound.is_finite()) {
            return bad("uniform_bound must be positive");
        }
        if !(self.val_frac > 0.0 && self.val_frac < 1.0) {
            return bad("val_frac must be in (0, 1)");
        }
        if !(self.train_eps_rel > 0.0) {
            return bad("train_eps_rel must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channel_rounding() {
        let c = VaeConfig::desk();
        assert_eq!(c.channels(1024), 64);
        assert_eq!(c.channels(1000), 63);
        assert_eq!(c.channels(200), 13);
        assert_eq!(c.base_rows(), 26);
        let tiny = VaeConfig {
            width_mult: 1e-4,
            ..VaeConfig::default()
        };
        assert_eq!(tiny.channels(200), 1);
        assert_eq!(VaeConfig::default().base_rows(), 1000);
    }

    #[test]
    fn invalid_configs() {
        for c in [
            VaeConfig { latent_dim: 0, ..VaeConfig::desk() },
            VaeConfig { width_mult: 1.5, ..VaeConfig::desk() },
            VaeConfig { batch_size: 1, ..VaeConfig::desk() },
            VaeConfig { n_points: 0, ..VaeConfig::desk() },
        ] {
            assert!(c.validate().is_err());
        }
        assert!(VaeConfig::desk().validate().is_ok());
    }
}
