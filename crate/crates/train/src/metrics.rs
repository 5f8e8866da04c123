//! Accuracy reports and their table renderings.

use gazefusion_core::dims::Category;
use gazefusion_core::{ACTIVE_DIMENSIONS, N_TASKS};
use gazefusion_model::{BatchInput, Graph, InferenceMode, ModalityPolicy, ModalityStats, Network};
use gazefusion_preprocess::AlignedSample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    /// Inference mode or variant the numbers were produced under.
    pub mode: String,
    pub trials: usize,
    pub threshold: f64,
    /// By dimension id.
    pub per_dimension: Vec<f64>,
    /// Unweighted mean over the objective dimensions.
    pub objective: f64,
    /// Unweighted mean over the subjective dimensions.
    pub subjective: f64,
    /// Unweighted mean over all dimensions.
    pub overall: f64,
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

impl AccuracyReport {
    /// Aggregate per-dimension accuracies.
    pub fn from_per_dimension(mode: &str, trials: usize, threshold: f64, per_dimension: [f64; N_TASKS]) -> Self {
        let by = |c: Category| mean(ACTIVE_DIMENSIONS.iter().filter(|d| d.category == c).map(|d| per_dimension[d.id]));
        AccuracyReport {
            mode: mode.to_string(),
            trials,
            threshold,
            per_dimension: per_dimension.to_vec(),
            objective: by(Category::Objective),
            subjective: by(Category::Subjective),
            overall: mean(per_dimension.iter().copied()),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Eval(format!("malformed report: {e}")))
    }

    /// Row of the objective-dimension table: aggregate then each dimension.
    pub fn objective_row(&self) -> Vec<f64> {
        std::iter::once(self.objective).chain(self.dims(Category::Objective)).collect()
    }

    pub fn subjective_row(&self) -> Vec<f64> {
        std::iter::once(self.subjective).chain(self.dims(Category::Subjective)).collect()
    }

    fn dims(&self, c: Category) -> impl Iterator<Item = f64> + '_ {
        ACTIVE_DIMENSIONS.iter().filter(move |d| d.category == c).map(|d| self.per_dimension[d.id])
    }
}

/// Score probabilities `[trial][task]` against labels: a prediction is
/// positive iff `p > threshold`.
pub fn evaluate_predictions(
    mode: &str,
    probs: &[[f64; N_TASKS]],
    labels: &[[u8; N_TASKS]],
    threshold: f64,
) -> Result<AccuracyReport> {
    if probs.is_empty() {
        return Err(Error::Eval("no trials to evaluate".into()));
    }
    if probs.len() != labels.len() {
        return Err(Error::Eval(format!("{} predictions for {} label rows", probs.len(), labels.len())));
    }
    let mut hits = [0usize; N_TASKS];
    for (p, y) in probs.iter().zip(labels) {
        for d in 0..N_TASKS {
            hits[d] += ((p[d] > threshold) == (y[d] == 1)) as usize;
        }
    }
    let n = probs.len();
    Ok(AccuracyReport::from_per_dimension(mode, n, threshold, hits.map(|h| h as f64 / n as f64)))
}

/// Inference-mode probabilities for every trial, in batches.
pub fn predict(
    net: &Network<f32>,
    trials: &[AlignedSample],
    policy: ModalityPolicy,
    stats: Option<&ModalityStats>,
    batch_size: usize,
) -> Result<Vec<[f64; N_TASKS]>> {
    let mut out = Vec::with_capacity(trials.len());
    for chunk in trials.chunks(batch_size.max(1)) {
        let refs: Vec<&AlignedSample> = chunk.iter().collect();
        let input = BatchInput::<f32>::from_samples(&refs, &net.config, policy, stats)?;
        let p = net.probabilities(&input, Graph::Full)?;
        out.extend(p.chunks(N_TASKS).map(|row| std::array::from_fn(|d| row[d] as f64)));
    }
    Ok(out)
}

/// Accuracy of the full network with gaze streams substituted per `policy`.
pub fn evaluate_policy(
    net: &Network<f32>,
    trials: &[AlignedSample],
    name: &str,
    policy: ModalityPolicy,
    stats: Option<&ModalityStats>,
    threshold: f64,
) -> Result<AccuracyReport> {
    if trials.is_empty() {
        return Err(Error::Eval("no trials to evaluate".into()));
    }
    let probs = predict(net, trials, policy, stats, 4)?;
    let labels: Vec<[u8; N_TASKS]> = trials.iter().map(|t| t.labels).collect();
    evaluate_predictions(name, &probs, &labels, threshold)
}

pub fn evaluate(
    net: &Network<f32>,
    trials: &[AlignedSample],
    mode: InferenceMode,
    stats: Option<&ModalityStats>,
    threshold: f64,
) -> Result<AccuracyReport> {
    evaluate_policy(net, trials, mode.name(), mode.policy(), stats, threshold)
}

fn render_table(title: &str, header: &[&str], rows: &[(String, Vec<f64>)]) -> String {
    let width0 = rows.iter().map(|r| r.0.len()).chain([header[0].len()]).max().unwrap_or(0);
    let widths: Vec<usize> = header.iter().skip(1).map(|h| h.len().max(5)).collect();
    let mut s = format!("{title}\n");
    s.push_str(&format!("{:<width0$}", header[0]));
    for (h, w) in header.iter().skip(1).zip(&widths) {
        s.push_str(&format!("  {h:>w$}"));
    }
    s.push('\n');
    for (label, vals) in rows {
        s.push_str(&format!("{label:<width0$}"));
        for (v, w) in vals.iter().zip(&widths) {
            s.push_str(&format!("  {v:>w$.3}"));
        }
        s.push('\n');
    }
    s
}

fn pretty(name: &str) -> String {
    let mut words: Vec<String> = name
        .split('_')
        .map(|w| {
            let mut c = w.chars();
            c.next().map(|f| f.to_uppercase().chain(c).collect()).unwrap_or_default()
        })
        .collect();
    if words.is_empty() {
        words.push(String::new());
    }
    words.join(" ")
}

/// Objective-dimension table, one row per labelled report.
pub fn objective_table(rows: &[(&str, &AccuracyReport)]) -> String {
    let mut header = vec!["Method".to_string(), "Overall".to_string()];
    header.extend(ACTIVE_DIMENSIONS.iter().filter(|d| d.category == Category::Objective).map(|d| pretty(d.name)));
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let r: Vec<(String, Vec<f64>)> = rows.iter().map(|(l, rep)| (l.to_string(), rep.objective_row())).collect();
    render_table("Accuracy on objective dimensions", &h, &r)
}

pub fn subjective_table(rows: &[(&str, &AccuracyReport)]) -> String {
    let mut header = vec!["Method".to_string(), "Overall".to_string()];
    header.extend(ACTIVE_DIMENSIONS.iter().filter(|d| d.category == Category::Subjective).map(|d| pretty(d.name)));
    let h: Vec<&str> = header.iter().map(String::as_str).collect();
    let r: Vec<(String, Vec<f64>)> = rows.iter().map(|(l, rep)| (l.to_string(), rep.subjective_row())).collect();
    render_table("Accuracy on subjective dimensions", &h, &r)
}

/// Two-column aggregate table (objective, subjective) per labelled report.
pub fn aggregate_table(title: &str, rows: &[(&str, &AccuracyReport)]) -> String {
    let r: Vec<(String, Vec<f64>)> = rows.iter().map(|(l, rep)| (l.to_string(), vec![rep.objective, rep.subjective])).collect();
    render_table(title, &["Method", "Objective Dim. Accuracy", "Subjective Dim. Accuracy"], &r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_fixture() {
        // 4 trials; dimension 0 right on 3, dimension 1 right on 1, rest all right
        let labels = [[1u8; N_TASKS], [0; N_TASKS], [1; N_TASKS], [0; N_TASKS]];
        let mut probs = labels.map(|r| r.map(|y| if y == 1 { 0.9 } else { 0.1 }));
        probs[0][0] = 0.2;
        probs[0][1] = 0.3;
        probs[1][1] = 0.6;
        probs[2][1] = 0.5; // not above threshold, label 1: wrong
        let r = evaluate_predictions("t", &probs, &labels, 0.5).unwrap();
        assert_eq!(r.per_dimension[0], 0.75);
        assert_eq!(r.per_dimension[1], 0.25);
        assert!(r.per_dimension[2..].iter().all(|&a| a == 1.0));
        assert_eq!(r.objective, (0.75 + 0.25 + 1.0 + 1.0) / 4.0);
        assert_eq!(r.subjective, 1.0);
    }

    #[test]
    fn empty_and_mismatched_inputs_rejected() {
        assert!(evaluate_predictions("t", &[], &[], 0.5).is_err());
        assert!(evaluate_predictions("t", &[[0.5; N_TASKS]], &[], 0.5).is_err());
    }

    #[test]
    fn report_round_trips() {
        let r = AccuracyReport::from_per_dimension("full", 3, 0.5, std::array::from_fn(|d| d as f64 / 20.0));
        assert_eq!(AccuracyReport::from_toml(&r.to_toml()).unwrap(), r);
    }

    #[test]
    fn table_shapes() {
        let r = AccuracyReport::from_per_dimension("full", 3, 0.5, [0.5; N_TASKS]);
        let t = objective_table(&[("Ours", &r)]);
        assert!(t.contains("Light") && t.contains("Naturalness"));
        let t = subjective_table(&[("Ours", &r)]);
        assert!(t.contains("Color Comfort") && t.contains("Explorability"));
        assert_eq!(t.lines().count(), 3);
    }
}
