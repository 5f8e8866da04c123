//! Modality ablations: a removed stream is zero-filled in training and
//! evaluation alike, and is never read from disk.

use gazefusion_core::SplitAssignment;
use gazefusion_model::{Fill, ModalityPolicy, ModelConfig};
use gazefusion_preprocess::{SampleStore, Streams};
use serde::{Deserialize, Serialize};

use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::experiment::{load_trials, train_pipeline, TrainedRun};
use crate::metrics::{aggregate_table, evaluate_policy, AccuracyReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    NoAttention,
    NoPupil,
    Neither,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Full, Variant::NoAttention, Variant::NoPupil, Variant::Neither];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoAttention => "no-attention",
            Variant::NoPupil => "no-pupil",
            Variant::Neither => "neither",
        }
    }

    /// Row label in the ablation table.
    pub fn label(self) -> &'static str {
        match self {
            Variant::Full => "Full model",
            Variant::NoAttention => "w/o visual attention",
            Variant::NoPupil => "w/o pupil",
            Variant::Neither => "w/o visual attention & pupil",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant {s:?}; expected full, no-attention, no-pupil or neither")))
    }

    pub fn policy(self) -> ModalityPolicy {
        let keep = |b: bool| if b { Fill::Observed } else { Fill::Zero };
        ModalityPolicy { pupil: keep(self.uses_pupil()), attention: keep(self.uses_attention()) }
    }

    pub fn streams(self) -> Streams {
        Streams { pupil: self.uses_pupil(), attention: self.uses_attention() }
    }

    fn uses_pupil(self) -> bool {
        matches!(self, Variant::Full | Variant::NoAttention)
    }

    fn uses_attention(self) -> bool {
        matches!(self, Variant::Full | Variant::NoPupil)
    }
}

#[derive(Debug)]
pub struct AblationResult {
    pub variant: Variant,
    /// Test-set accuracy under the variant's own substitution.
    pub report: AccuracyReport,
    pub run: TrainedRun,
}

/// Train and test one variant on the given participant split.
pub fn run_ablation(
    model: &ModelConfig,
    cfg: &TrainConfig,
    variant: Variant,
    store: &SampleStore,
    split: &SplitAssignment,
) -> Result<AblationResult> {
    let trials = load_trials(store, split, variant.streams())?;
    let run = train_pipeline(model, cfg, variant, &trials.train, &trials.val)?;
    let report = evaluate_policy(&run.net, &trials.test, variant.name(), variant.policy(), run.stats.as_ref(), cfg.threshold)?;
    Ok(AblationResult { variant, report, run })
}

/// The ablation grid: one row per variant, objective and subjective columns.
pub fn ablation_table(rows: &[(Variant, &AccuracyReport)]) -> String {
    let labelled: Vec<(&str, &AccuracyReport)> = rows.iter().map(|(v, r)| (v.label(), *r)).collect();
    aggregate_table("Accuracy under modality ablations", &labelled)
}
