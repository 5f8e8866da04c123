use std::path::Path;

use gazefusion_core::{ACTIVE_DIMENSIONS, N_TASKS};
use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageTag {
    Stage1,
    Stage3,
}

impl StageTag {
    pub fn name(self) -> &'static str {
        match self {
            StageTag::Stage1 => "stage1",
            StageTag::Stage3 => "stage3",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub stage: StageTag,
    /// 1-based within the stage.
    pub epoch: usize,
    pub train_loss: f64,
    /// Running accuracy over the epoch's training batches.
    pub train_accuracy: f64,
    /// `None` without a validation set.
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<[f64; N_TASKS]>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept, per stage.
    pub best_epoch: Vec<(StageTag, usize)>,
    /// Epoch at which each stage stopped.
    pub stop_epoch: Vec<(StageTag, usize)>,
}

impl TrainHistory {
    pub fn stage(&self, tag: StageTag) -> impl Iterator<Item = &EpochRecord> {
        self.epochs.iter().filter(move |e| e.stage == tag)
    }

    pub fn extend(&mut self, other: TrainHistory) {
        self.epochs.extend(other.epochs);
        self.best_epoch.extend(other.best_epoch);
        self.stop_epoch.extend(other.stop_epoch);
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header =
            vec!["stage".to_string(), "epoch".into(), "train_loss".into(), "train_accuracy".into(), "val_loss".into()];
        header.extend(ACTIVE_DIMENSIONS.iter().map(|d| format!("val_acc_{}", d.name)));
        w.write_record(&header)?;
        for e in &self.epochs {
            let mut row = vec![
                e.stage.name().to_string(),
                e.epoch.to_string(),
                e.train_loss.to_string(),
                e.train_accuracy.to_string(),
                e.val_loss.map(|v| v.to_string()).unwrap_or_default(),
            ];
            match &e.val_accuracy {
                Some(a) => row.extend(a.iter().map(|v| v.to_string())),
                None => row.extend(std::iter::repeat_n(String::new(), N_TASKS)),
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}
