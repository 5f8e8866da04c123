use gazefusion_core::KvConfig;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimization and protocol settings shared by all three stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub stage1_epochs: usize,
    pub stage3_epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    /// Share of hidden units per gate block whose recurrent rows stay frozen
    /// in stage three.
    pub freeze_fraction: f64,
    /// `Some(seed)` draws the frozen units at random instead of taking the
    /// leading ones.
    pub freeze_seed: Option<u64>,
    pub seed: u64,
    /// Epochs without a validation-loss improvement before stopping.
    pub patience: usize,
    /// Stop a stage once the epoch's running training accuracy reaches
    /// this value.
    pub target_train_accuracy: Option<f64>,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            stage1_epochs: 200,
            stage3_epochs: 100,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            batch_size: 4,
            freeze_fraction: 0.3,
            freeze_seed: None,
            seed: 0,
            patience: 10,
            target_train_accuracy: None,
            threshold: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.stage1_epochs == 0 || self.stage3_epochs == 0 {
            return Err(Error::Config("stage epochs must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.freeze_fraction) {
            return Err(Error::Config(format!("freeze_fraction {} outside [0, 1]", self.freeze_fraction)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0) || !(self.eps > 0.0) {
            return Err(Error::Config("learning_rate and eps must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("Adam betas must lie in [0, 1)".into()));
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return Err(Error::Config("threshold must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Read `train.*` keys over the defaults.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let d = Self::default();
        let c = TrainConfig {
            stage1_epochs: kv.get_or("train.stage1_epochs", d.stage1_epochs)?,
            stage3_epochs: kv.get_or("train.stage3_epochs", d.stage3_epochs)?,
            learning_rate: kv.get_or("train.learning_rate", d.learning_rate)?,
            beta1: kv.get_or("train.beta1", d.beta1)?,
            beta2: kv.get_or("train.beta2", d.beta2)?,
            eps: kv.get_or("train.eps", d.eps)?,
            batch_size: kv.get_or("train.batch_size", d.batch_size)?,
            freeze_fraction: kv.get_or("train.freeze_fraction", d.freeze_fraction)?,
            freeze_seed: kv.get("train.freeze_seed")?,
            seed: kv.get_or("train.seed", d.seed)?,
            patience: kv.get_or("train.patience", d.patience)?,
            target_train_accuracy: kv.get("train.target_train_accuracy")?,
            threshold: kv.get_or("train.threshold", d.threshold)?,
        };
        Ok(c)
    }

    /// Frozen rows per gate block for hidden size `h`.
    pub fn frozen_units(&self, h: usize) -> usize {
        // tolerate representation error such as 0.3 * 10 = 3.0000000000000004
        let x = self.freeze_fraction * h as f64;
        let r = x.round();
        if (x - r).abs() < 1e-9 {
            r as usize
        } else {
            x.ceil() as usize
        }
    }
}
