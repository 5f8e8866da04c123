use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::DatasetManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub assignment: BTreeMap<String, Split>,
    pub ratios: (f64, f64, f64),
    pub seed: u64,
}

impl SplitAssignment {
    pub fn split_of(&self, participant: &str) -> Option<Split> {
        self.assignment.get(participant).copied()
    }

    pub fn members(&self, split: Split) -> Vec<&str> {
        self.assignment.iter().filter(|(_, s)| **s == split).map(|(p, _)| p.as_str()).collect()
    }

    pub fn counts(&self) -> (usize, usize, usize) {
        let n = |s| self.assignment.values().filter(|&&v| v == s).count();
        (n(Split::Train), n(Split::Val), n(Split::Test))
    }
}

/// Assign participants (never individual trials) to train/val/test.
///
/// Validation and test sizes are `round(r * P)`, each at least one; every
/// remaining participant goes to train.
pub fn split_participants(participants: &[String], ratios: (f64, f64, f64), seed: u64) -> Result<SplitAssignment> {
    let (rt, rv, rs) = ratios;
    if [rt, rv, rs].iter().any(|r| !(0.0..=1.0).contains(r)) || ((rt + rv + rs) - 1.0).abs() > 1e-9 {
        return Err(Error::Split(format!("ratios {ratios:?} must be in [0,1] and sum to 1")));
    }
    let mut ids: Vec<String> = participants.to_vec();
    ids.sort();
    ids.dedup();
    let p = ids.len();
    if p < 3 {
        return Err(Error::Split(format!("{p} participants cannot populate three splits")));
    }
    let n_val = ((rv * p as f64).round() as usize).max(1);
    let n_test = ((rs * p as f64).round() as usize).max(1);
    if n_val + n_test >= p {
        return Err(Error::Split(format!("ratios {ratios:?} leave no training participants out of {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ids.shuffle(&mut rng);
    let n_train = p - n_val - n_test;
    let assignment = ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| {
            let s = if i < n_train {
                Split::Train
            } else if i < n_train + n_val {
                Split::Val
            } else {
                Split::Test
            };
            (id, s)
        })
        .collect();
    Ok(SplitAssignment { assignment, ratios, seed })
}

pub fn split_by_participant(manifest: &DatasetManifest, ratios: (f64, f64, f64), seed: u64) -> Result<SplitAssignment> {
    split_participants(&manifest.participants(), ratios, seed)
}
