//! Per-subject rating normalization and binarization.

use std::collections::BTreeMap;

use gazefusion_core::{SequenceRecord, N_TASKS};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Likert midpoint used to break exact ties.
const MIDPOINT: u8 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub participant_id: String,
    pub video_id: String,
    pub z: [f64; N_TASKS],
    pub labels: [u8; N_TASKS],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct NormalizedLabelTable {
    pub rows: Vec<LabelRow>,
    pub stats: BTreeMap<String, Vec<SubjectStats>>,
}

impl NormalizedLabelTable {
    pub fn get(&self, participant: &str, video: &str) -> Option<&LabelRow> {
        self.rows.iter().find(|r| r.participant_id == participant && r.video_id == video)
    }
}

/// Z-score each participant's ratings per dimension, then label 1 iff z > 0.
///
/// An exact tie (z = 0, which includes every zero-variance case) is broken
/// on the raw scale: label 1 iff the rating exceeds the Likert midpoint.
/// The sign of z is decided in integer arithmetic so ties are exact.
pub fn normalize_and_binarize<'a, I>(records: I) -> Result<NormalizedLabelTable>
where
    I: IntoIterator<Item = (&'a str, &'a str, &'a [u8; N_TASKS])>,
{
    let mut by_subject: BTreeMap<&str, Vec<(&str, &[u8; N_TASKS])>> = BTreeMap::new();
    for (p, v, r) in records {
        by_subject.entry(p).or_default().push((v, r));
    }
    let mut table = NormalizedLabelTable::default();
    for (p, trials) in by_subject {
        let n = trials.len();
        if n < 2 {
            return Err(Error::Labels(format!(
                "participant {p} rated {n} video(s); at least 2 are needed for a standard deviation"
            )));
        }
        let mut stats = Vec::with_capacity(N_TASKS);
        for d in 0..N_TASKS {
            let sum: f64 = trials.iter().map(|(_, r)| r[d] as f64).sum();
            let mean = sum / n as f64;
            let var = trials.iter().map(|(_, r)| (r[d] as f64 - mean).powi(2)).sum::<f64>() / n as f64;
            stats.push(SubjectStats { mean, std: var.sqrt() });
        }
        for (v, r) in &trials {
            let mut z = [0.0; N_TASKS];
            let mut labels = [0u8; N_TASKS];
            for d in 0..N_TASKS {
                let int_sum: i64 = trials.iter().map(|(_, r)| r[d] as i64).sum();
                // sign of (r - mean) * n
                let centered = r[d] as i64 * n as i64 - int_sum;
                let s = stats[d];
                z[d] = if s.std > 0.0 && centered != 0 { (r[d] as f64 - s.mean) / s.std } else { 0.0 };
                labels[d] = match centered.signum() {
                    1 => 1,
                    -1 => 0,
                    _ => (r[d] > MIDPOINT) as u8,
                };
            }
            table.rows.push(LabelRow { participant_id: p.to_string(), video_id: v.to_string(), z, labels });
        }
        table.stats.insert(p.to_string(), stats);
    }
    Ok(table)
}

/// Convenience over loaded records.
pub fn normalize_records(records: &[SequenceRecord]) -> Result<NormalizedLabelTable> {
    normalize_and_binarize(records.iter().map(|r| (r.participant_id.as_str(), r.video_id.as_str(), &r.ratings)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table_for(ratings: &[u8]) -> NormalizedLabelTable {
        let rows: Vec<[u8; N_TASKS]> = ratings.iter().map(|&r| [r; N_TASKS]).collect();
        let vids: Vec<String> = (0..ratings.len()).map(|i| format!("V{i}")).collect();
        normalize_and_binarize(rows.iter().zip(&vids).map(|(r, v)| ("P0", v.as_str(), r))).unwrap()
    }

    #[test]
    fn two_ratings() {
        let t = table_for(&[3, 5]);
        assert_eq!(t.rows[0].z[0], -1.0);
        assert_eq!(t.rows[1].z[0], 1.0);
        assert_eq!((t.rows[0].labels[0], t.rows[1].labels[0]), (0, 1));
    }

    #[test]
    fn zero_variance_uses_midpoint() {
        let t = table_for(&[6, 6, 6]);
        assert!(t.rows.iter().all(|r| r.z[5] == 0.0 && r.labels[5] == 1));
        let t = table_for(&[4, 4]);
        assert!(t.rows.iter().all(|r| r.labels[0] == 0));
    }

    #[test]
    fn one_four_seven() {
        let t = table_for(&[1, 4, 7]);
        let k = (1.5f64).sqrt();
        assert!((t.rows[0].z[2] + k).abs() < 1e-12);
        assert_eq!(t.rows[1].z[2], 0.0);
        assert!((t.rows[2].z[2] - k).abs() < 1e-12);
        let labels: Vec<u8> = t.rows.iter().map(|r| r.labels[2]).collect();
        assert_eq!(labels, [0, 0, 1]);
    }

    #[test]
    fn single_video_participant_is_error() {
        let r = [4u8; N_TASKS];
        assert!(normalize_and_binarize([("P0", "V0", &r)]).is_err());
    }

    #[test]
    fn z_scores_have_zero_mean_unit_std() {
        let ratings: Vec<[u8; N_TASKS]> =
            (0..7u8).map(|i| std::array::from_fn(|d| 1 + ((i as usize * 3 + d * 5) % 7) as u8)).collect();
        let vids: Vec<String> = (0..7).map(|i| format!("V{i}")).collect();
        let t = normalize_and_binarize(ratings.iter().zip(&vids).map(|(r, v)| ("P", v.as_str(), r))).unwrap();
        for d in 0..N_TASKS {
            if t.stats["P"][d].std == 0.0 {
                continue;
            }
            let zs: Vec<f64> = t.rows.iter().map(|r| r.z[d]).collect();
            let m = zs.iter().sum::<f64>() / zs.len() as f64;
            let s = (zs.iter().map(|z| (z - m).powi(2)).sum::<f64>() / zs.len() as f64).sqrt();
            assert!(m.abs() < 1e-9, "mean {m}");
            assert!((s - 1.0).abs() < 1e-6, "std {s}");
        }
    }
}
