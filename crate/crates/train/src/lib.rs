//! Three-stage training protocol, metrics and modality ablations.
//!
//! Stage one trains the temporal branch with temporary heads. Stage two
//! copies its recurrent weights into the spatial branch and fixes a freeze
//! mask over part of them. Stage three trains everything else jointly.

pub mod ablation;
pub mod adam;
pub mod config;
pub mod error;
pub mod experiment;
pub mod history;
pub mod loss;
pub mod metrics;
pub mod stages;
pub mod transfer;

pub use ablation::{ablation_table, run_ablation, AblationResult, Variant};
pub use config::TrainConfig;
pub use error::{Error, Result};
pub use experiment::{load_trials, model_config_for, run_experiment, train_pipeline, TrainedRun, Trials};
pub use history::{EpochRecord, StageTag, TrainHistory};
pub use loss::{bce_loss, bce_with_logits};
pub use metrics::{evaluate, evaluate_policy, evaluate_predictions, AccuracyReport};
pub use stages::{stage1_pretrain, stage3_joint_finetune, StageData};
pub use transfer::{stage2_transfer, transfer_lstm, FreezeMask};
