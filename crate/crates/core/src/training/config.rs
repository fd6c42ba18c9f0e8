use serde::{Deserialize, Serialize};

use crate::error::{Result, VcsError};
use crate::sensing::MaskKind;
use crate::unfold_net::Mode;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Epochs of (stage-1 only, stage-2 with stage 1 frozen, end-to-end).
    pub epochs_per_phase: [usize; 3],
    pub batch_size: usize,
    pub lr0: f64,
    pub lr_warm_epochs: usize,
    pub lr_decay: f64,
    pub lr_decay_every: usize,
    pub grad_clip: f64,
    pub seed: u64,
    /// Number of training scenes.
    pub samples: usize,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub mode: Mode,
    pub mask_kind: MaskKind,
    pub mask_seed: u64,
    pub noise_sigma: f64,
    pub resample_masks_per_batch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs_per_phase: [15, 15, 10],
            batch_size: 4,
            lr0: 5e-5,
            lr_warm_epochs: 8,
            lr_decay: 0.5,
            lr_decay_every: 5,
            grad_clip: 5.0,
            seed: 0,
            samples: 200,
            width: 32,
            height: 32,
            frames: 4,
            mode: Mode::Gray,
            mask_kind: MaskKind::Binary,
            mask_seed: 1,
            noise_sigma: 0.0,
            resample_masks_per_batch: false,
        }
    }
}

impl TrainConfig {
    /// Learning rate for `epoch` counted from the start of a phase.
    pub fn lr(&self, epoch: usize) -> f64 {
        if epoch < self.lr_warm_epochs {
            self.lr0
        } else {
            let k = (epoch - self.lr_warm_epochs) / self.lr_decay_every + 1;
            self.lr0 * self.lr_decay.powi(k as i32)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(VcsError::Config(format!("train.{what}")));
        if self.batch_size == 0 {
            return bad("batch_size must be ≥ 1");
        }
        if self.samples == 0 {
            return bad("samples must be ≥ 1");
        }
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return bad("lr0 must be finite and ≥ 0");
        }
        if self.lr_decay_every == 0 {
            return bad("lr_decay_every must be ≥ 1");
        }
        if !(self.grad_clip > 0.0) {
            return bad("grad_clip must be > 0");
        }
        if self.width == 0 || self.height == 0 || self.frames == 0 {
            return bad("width, height and frames must be ≥ 1");
        }
        if !self.width.is_multiple_of(2) || !self.height.is_multiple_of(2) {
            return bad("width and height must be even");
        }
        if !(self.noise_sigma >= 0.0) {
            return bad("noise_sigma must be ≥ 0");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_values() {
        let cfg = TrainConfig::default();
        for e in 0..8 {
            assert_eq!(cfg.lr(e), 5e-5);
        }
        assert_eq!(cfg.lr(8), 2.5e-5);
        assert_eq!(cfg.lr(12), 2.5e-5);
        assert_eq!(cfg.lr(13), 1.25e-5);
    }
}
