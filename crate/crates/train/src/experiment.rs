//! End-to-end runs and their output directory.
//!
//! ```text
//! <out>/run.toml             model and training config, variant, split, seeds
//! <out>/stage1/              checkpoint after stage one
//! <out>/final/               checkpoint after stage three (with mean-fill statistics)
//! <out>/history.csv          per-epoch losses and validation accuracies
//! <out>/report_<mode>.toml   test-set accuracy per evaluated mode
//! ```

use std::path::Path;

use gazefusion_core::{Split, SplitAssignment};
use gazefusion_model::{save_checkpoint, InferenceMode, ModalityStats, ModelConfig, Network};
use gazefusion_preprocess::{AlignedSample, SampleIndex, SampleStore, Streams};
use serde::{Deserialize, Serialize};

use crate::ablation::Variant;
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::history::TrainHistory;
use crate::metrics::{evaluate, evaluate_policy, AccuracyReport};
use crate::stages::{stage1_pretrain, stage3_joint_finetune, StageData};
use crate::transfer::{stage2_transfer, FreezeMask};

#[derive(Debug, Default)]
pub struct Trials {
    pub train: Vec<AlignedSample>,
    pub val: Vec<AlignedSample>,
    pub test: Vec<AlignedSample>,
}

/// Load every stored sample into its participant's split, reading only
/// `streams`.
pub fn load_trials(store: &SampleStore, split: &SplitAssignment, streams: Streams) -> Result<Trials> {
    let mut t = Trials::default();
    for i in 0..store.len() {
        let m = store.meta(i);
        let dst = match split.split_of(&m.participant_id) {
            Some(Split::Train) => &mut t.train,
            Some(Split::Val) => &mut t.val,
            Some(Split::Test) => &mut t.test,
            None => return Err(Error::Config(format!("participant {} missing from split", m.participant_id))),
        };
        dst.push(store.load(i, streams)?);
    }
    Ok(t)
}

/// `base` with input sizes taken from a preprocessed index.
pub fn model_config_for(index: &SampleIndex, base: &ModelConfig) -> ModelConfig {
    ModelConfig {
        steps: index.steps,
        frame_height: index.frame_height,
        frame_width: index.frame_width,
        pupil_size: index.pupil_size,
        map_height: index.map_height,
        map_width: index.map_width,
        ..base.clone()
    }
}

#[derive(Debug)]
pub struct TrainedRun {
    pub net: Network<f32>,
    /// Training-set means of both gaze streams; only for the full variant.
    pub stats: Option<ModalityStats>,
    pub mask: FreezeMask,
    pub history: TrainHistory,
    pub stage1: Network<f32>,
}

/// Stages one to three on in-memory trials.
pub fn train_pipeline(
    model: &ModelConfig,
    cfg: &TrainConfig,
    variant: Variant,
    train: &[AlignedSample],
    val: &[AlignedSample],
) -> Result<TrainedRun> {
    cfg.validate()?;
    let stats = match variant {
        Variant::Full => Some(ModalityStats::from_samples(train)?),
        _ => None,
    };
    let data = StageData { train, val, policy: variant.policy(), stats: stats.as_ref() };
    let mut net = Network::new(model.clone(), cfg.seed)?;
    let mut history = stage1_pretrain(&mut net, &data, cfg)?;
    let stage1 = net.clone();
    let mask = stage2_transfer(&mut net, cfg)?;
    history.extend(stage3_joint_finetune(&mut net, &mask, &data, cfg)?);
    Ok(TrainedRun { net, stats, mask, history, stage1 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: Variant,
    pub split_seed: u64,
    pub split_ratios: (f64, f64, f64),
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub train_participants: Vec<String>,
    pub val_participants: Vec<String>,
    pub test_participants: Vec<String>,
}

/// Modes a variant's model is evaluated under.
pub fn report_modes(variant: Variant) -> Vec<(String, Option<InferenceMode>)> {
    match variant {
        Variant::Full => [InferenceMode::FullMultimodal, InferenceMode::VideoOnlyZero, InferenceMode::VideoOnlyMeanFill]
            .into_iter()
            .map(|m| (m.name().to_string(), Some(m)))
            .collect(),
        v => vec![(v.name().to_string(), None)],
    }
}

/// Run the whole protocol and write the output directory.
pub fn run_experiment(
    store: &SampleStore,
    split: &SplitAssignment,
    model: &ModelConfig,
    cfg: &TrainConfig,
    variant: Variant,
    out: &Path,
) -> Result<Vec<AccuracyReport>> {
    let model = model_config_for(&store.index, model);
    let trials = load_trials(store, split, variant.streams())?;
    if trials.test.is_empty() {
        return Err(Error::Config("test split holds no trials".into()));
    }
    std::fs::create_dir_all(out)?;
    let record = RunRecord {
        variant,
        split_seed: split.seed,
        split_ratios: split.ratios,
        train: cfg.clone(),
        model: model.clone(),
        train_participants: split.members(Split::Train).iter().map(|s| s.to_string()).collect(),
        val_participants: split.members(Split::Val).iter().map(|s| s.to_string()).collect(),
        test_participants: split.members(Split::Test).iter().map(|s| s.to_string()).collect(),
    };
    std::fs::write(out.join("run.toml"), toml::to_string(&record).expect("run record serializes"))?;
    let run = train_pipeline(&model, cfg, variant, &trials.train, &trials.val)?;
    save_checkpoint(&out.join("stage1"), &run.stage1, None)?;
    save_checkpoint(&out.join("final"), &run.net, run.stats.as_ref())?;
    run.history.write_csv(&out.join("history.csv"))?;
    let mut reports = Vec::new();
    for (name, mode) in report_modes(variant) {
        let r = match mode {
            Some(m) => evaluate(&run.net, &trials.test, m, run.stats.as_ref(), cfg.threshold)?,
            None => evaluate_policy(&run.net, &trials.test, &name, variant.policy(), None, cfg.threshold)?,
        };
        std::fs::write(out.join(format!("report_{name}.toml")), r.to_toml())?;
        reports.push(r);
    }
    Ok(reports)
}
