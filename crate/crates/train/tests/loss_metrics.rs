mod common;

use gazefusion_core::N_TASKS;
use gazefusion_model::{InferenceMode, ModalityStats, Network};
use gazefusion_train::metrics::{aggregate_table, predict};
use gazefusion_train::{bce_loss, evaluate, evaluate_predictions, AccuracyReport};
use proptest::prelude::*;

#[test]
fn perfect_prediction_loss_is_tiny() {
    let labels = [1u8, 0, 1, 1, 0, 0, 1, 0, 1, 0, 1, 1, 0, 0, 1];
    let probs: Vec<f64> = labels.iter().map(|&y| y as f64).collect();
    assert!(bce_loss(&probs, &labels) < 1e-5);
}

#[test]
#[allow(clippy::approx_constant)] // rounded reference value
fn half_probabilities_give_ln2() {
    let labels = [1u8, 0, 1, 1, 0, 0, 1, 0, 1, 0, 1, 1, 0, 0, 1];
    let l = bce_loss(&[0.5; N_TASKS], &labels);
    assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    assert!((l - 0.6931).abs() < 5e-5);
}

#[test]
fn inverted_prediction_hits_the_clamp() {
    let labels = [1u8, 0, 1, 1, 0, 0, 1, 0, 1, 0, 1, 1, 0, 0, 1];
    let probs: Vec<f64> = labels.iter().map(|&y| 1.0 - y as f64).collect();
    let l = bce_loss(&probs, &labels);
    // -ln(1e-7)
    assert!((l - 16.118_095_650_958_32).abs() < 1e-6, "{l}");
    assert!((l - 16.12).abs() < 5e-3);
}

#[test]
fn all_correct_on_five_trials() {
    let labels: Vec<[u8; N_TASKS]> = (0..5).map(|i| std::array::from_fn(|d| ((i + d) % 2) as u8)).collect();
    let probs: Vec<[f64; N_TASKS]> = labels.iter().map(|r| r.map(|y| if y == 1 { 0.8 } else { 0.3 })).collect();
    let r = evaluate_predictions("full", &probs, &labels, 0.5).unwrap();
    assert!(r.per_dimension.iter().all(|&a| a == 1.0));
    assert_eq!((r.objective, r.subjective, r.overall), (1.0, 1.0, 1.0));
}

#[test]
fn published_per_dimension_values_imply_published_aggregates() {
    let per = [0.743, 0.743, 0.743, 0.657, 0.629, 0.657, 0.629, 0.657, 0.657, 0.743, 0.657, 0.714, 0.686, 0.686, 0.629];
    let r = AccuracyReport::from_per_dimension("full", 35, 0.5, per);
    assert!((r.objective - 0.7215).abs() < 1e-12);
    assert!((r.subjective - 7.344 / 11.0).abs() < 1e-12);
    assert!((r.objective - 0.722).abs() <= 0.0005 && (r.subjective - 0.668).abs() <= 0.0005);
}

proptest! {
    #[test]
    fn accuracies_match_hand_count(
        rows in proptest::collection::vec((proptest::array::uniform15(0.0f64..1.0), proptest::array::uniform15(0u8..2)), 1..20),
        threshold in 0.05f64..0.95,
    ) {
        let probs: Vec<[f64; N_TASKS]> = rows.iter().map(|r| r.0).collect();
        let labels: Vec<[u8; N_TASKS]> = rows.iter().map(|r| r.1).collect();
        let rep = evaluate_predictions("x", &probs, &labels, threshold).unwrap();
        for d in 0..N_TASKS {
            let hits = rows.iter().filter(|(p, y)| (p[d] > threshold) == (y[d] == 1)).count();
            prop_assert_eq!(rep.per_dimension[d], hits as f64 / rows.len() as f64);
        }
        let obj = rep.per_dimension[..4].iter().sum::<f64>() / 4.0;
        prop_assert!((rep.objective - obj).abs() < 1e-12);
    }
}

#[test]
fn modes_differ_only_in_substitution() {
    let cfg = common::small_config();
    let mut net = Network::<f32>::new(cfg.clone(), 3).unwrap();
    net.discard_stage1_heads();
    let mut samples = common::random_samples(&cfg, 6, 2);
    let stats = ModalityStats::from_samples(&samples).unwrap();
    // observed streams equal to the means: full and mean-fill must agree exactly
    for s in &mut samples {
        s.pupil = Some(stats.pupil.repeat(cfg.steps));
        s.attention = Some(stats.attention.repeat(cfg.steps));
    }
    let full = evaluate(&net, &samples, InferenceMode::FullMultimodal, Some(&stats), 0.5).unwrap();
    let mean = evaluate(&net, &samples, InferenceMode::VideoOnlyMeanFill, Some(&stats), 0.5).unwrap();
    assert_eq!(full.per_dimension, mean.per_dimension);
    let pf = predict(&net, &samples, InferenceMode::FullMultimodal.policy(), Some(&stats), 4).unwrap();
    let pm = predict(&net, &samples, InferenceMode::VideoOnlyMeanFill.policy(), Some(&stats), 4).unwrap();
    assert_eq!(pf, pm);
    // video-only input without stats is refused for mean fill
    assert!(evaluate(&net, &samples, InferenceMode::VideoOnlyMeanFill, None, 0.5).is_err());
    assert!(evaluate(&net, &[], InferenceMode::FullMultimodal, None, 0.5).is_err());
}

#[test]
fn video_only_tables_share_schema() {
    let a = AccuracyReport::from_per_dimension("full", 3, 0.5, [0.5; N_TASKS]);
    let b = AccuracyReport::from_per_dimension("video-only-mean", 3, 0.5, [0.25; N_TASKS]);
    let ta = aggregate_table("t", &[("x", &a)]);
    let tb = aggregate_table("t", &[("x", &b)]);
    assert_eq!(ta.lines().next(), tb.lines().next());
    assert_eq!(ta.lines().nth(1), tb.lines().nth(1));
}
