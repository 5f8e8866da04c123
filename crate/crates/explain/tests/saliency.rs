use gazefusion_core::N_TASKS;
use gazefusion_explain::{
    bilinear_upsample, explain, grad_cam, read_saliency, temporal_saliency, write_curve_png, write_overlay_png, write_saliency,
    CamLayer, OUT_HEIGHT, OUT_WIDTH,
};
use gazefusion_model::{BatchInput, Graph, KeepMaps, ModalityPolicy, ModelConfig, Network};
use gazefusion_preprocess::AlignedSample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(task_channels: usize) -> ModelConfig {
    ModelConfig {
        steps: 4,
        frame_height: 16,
        frame_width: 16,
        pupil_size: 8,
        map_height: 16,
        map_width: 16,
        video_channels: vec![4, 6, 8],
        pupil_channels: vec![4, 6],
        attention_channels: vec![4, 6, 8],
        video_task_channels: task_channels,
        pupil_task_channels: 4,
        hidden: 8,
        head_hidden: 8,
        ..ModelConfig::default()
    }
}

fn sample(cfg: &ModelConfig, seed: u64, uniform: bool) -> AlignedSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = cfg.steps;
    let mut draw = |n: usize, scale: f32| -> Vec<f32> {
        (0..n).map(|_| if uniform { 0.5 * scale } else { scale * rng.random::<f32>() }).collect()
    };
    AlignedSample {
        participant_id: "P00".into(),
        video_id: "V00".into(),
        steps: t,
        frame_height: cfg.frame_height,
        frame_width: cfg.frame_width,
        frames: draw(t * 3 * cfg.frame_height * cfg.frame_width, 1.0),
        pupil_size: cfg.pupil_size,
        pupil: Some(draw(t * 2 * cfg.pupil_size * cfg.pupil_size, 1.0)),
        map_height: cfg.map_height,
        map_width: cfg.map_width,
        attention: Some(draw(t * cfg.map_height * cfg.map_width, 0.02)),
        labels: [1; N_TASKS],
    }
}

const OBS: ModalityPolicy = ModalityPolicy::OBSERVED;

#[test]
fn maps_are_normalized_and_weights_sum_to_one() {
    let cfg = config(6);
    let net = Network::<f32>::new(cfg.clone(), 1).unwrap();
    for seed in 0..3 {
        let s = sample(&cfg, seed, false);
        for layer in [CamLayer::SpatialVideoTask, CamLayer::TemporalVideoTask] {
            for task in [0, 3, 14] {
                let r = explain(&net, &s, task, layer, OBS, None).unwrap();
                assert_eq!(r.spatial.data.len(), cfg.steps * OUT_HEIGHT * OUT_WIDTH);
                for t in 0..cfg.steps {
                    let f = r.spatial.frame(t);
                    assert!(f.iter().all(|&v| (0.0..=1.0).contains(&v)));
                    let peak = f.iter().cloned().fold(0.0f32, f32::max);
                    assert!(peak == 0.0 || (peak - 1.0).abs() < 1e-6);
                }
                for w in [&r.temporal.temporal_branch, &r.temporal.spatial_branch, &r.temporal.combined] {
                    assert_eq!(w.len(), cfg.steps);
                    assert!(w.iter().all(|&v| v >= 0.0));
                    assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                }
                assert_eq!(grad_cam(&net, &s, task, layer, OBS, None).unwrap(), r.spatial);
                assert_eq!(temporal_saliency(&net, &s, task, OBS, None).unwrap(), r.temporal);
            }
        }
    }
}

/// With one channel the map is ReLU(w * A); `w` comes from a central
/// difference of the logit in the pooled feature, independent of the
/// backward pass.
#[test]
fn single_channel_matches_hand_computation() {
    let cfg = config(1);
    let net = Network::<f32>::new(cfg.clone(), 4).unwrap().to_f64();
    let s = sample(&cfg, 9, false);
    let task = 3;
    for layer in [CamLayer::SpatialVideoTask, CamLayer::TemporalVideoTask] {
        let input = BatchInput::<f64>::from_samples(&[&s], &cfg, OBS, None).unwrap();
        let keep = KeepMaps { temporal: true, spatial: true };
        let (feats, maps) = net.features_eval(&input, Graph::Full, &keep).unwrap();
        let maps = match layer {
            CamLayer::SpatialVideoTask => maps.spatial.unwrap(),
            CamLayer::TemporalVideoTask => maps.temporal.unwrap(),
        };
        let hw = maps.height * maps.width;
        let got = grad_cam(&net, &s, task, layer, OBS, None).unwrap();
        for t in 0..cfg.steps {
            let idx = t * N_TASKS + task;
            let logit = |delta: f64| {
                let mut f = feats.clone();
                match layer {
                    CamLayer::SpatialVideoTask => f.sv[idx] += delta,
                    CamLayer::TemporalVideoTask => f.tv[idx] += delta,
                }
                net.top_forward(&f, 1, Graph::Full).unwrap().0[task]
            };
            let h = 1e-5;
            let w = (logit(h) - logit(-h)) / (2.0 * h);
            let a = &maps.data[(t * N_TASKS + task) * hw..][..hw];
            let low: Vec<f64> = a.iter().map(|&v| (w * v).max(0.0)).collect();
            let up = bilinear_upsample(&low, maps.height, maps.width, OUT_HEIGHT, OUT_WIDTH);
            let peak = up.iter().cloned().fold(0.0, f64::max);
            for (g, u) in got.frame(t).iter().zip(&up) {
                let want = if peak > 0.0 { u / peak } else { 0.0 };
                assert!((*g as f64 - want).abs() < 1e-5, "{layer:?} t={t}: {g} vs {want}");
            }
        }
    }
}

#[test]
fn explanations_ignore_label_values() {
    let cfg = config(6);
    let net = Network::<f32>::new(cfg.clone(), 2).unwrap();
    let a = sample(&cfg, 5, false);
    let mut b = a.clone();
    b.labels = [0; N_TASKS];
    for task in [1, 8] {
        let ra = explain(&net, &a, task, CamLayer::SpatialVideoTask, OBS, None).unwrap();
        let rb = explain(&net, &b, task, CamLayer::SpatialVideoTask, OBS, None).unwrap();
        assert_eq!(ra, rb);
    }
}

#[test]
fn constant_logit_gives_zero_maps_and_uniform_weights() {
    let cfg = config(6);
    let mut net = Network::<f32>::new(cfg.clone(), 3).unwrap();
    let task = 2;
    net.heads[task].fc2.weight.zero_();
    let s = sample(&cfg, 1, false);
    let r = explain(&net, &s, task, CamLayer::SpatialVideoTask, OBS, None).unwrap();
    assert!(r.spatial.data.iter().all(|&v| v == 0.0));
    assert!(r.temporal.combined.iter().all(|&v| v == 0.25));
    assert!(r.spatial.mass_center(0).is_none());
}

#[test]
fn uniform_input_stays_finite() {
    let cfg = config(6);
    let net = Network::<f32>::new(cfg.clone(), 8).unwrap();
    let s = sample(&cfg, 0, true);
    for task in 0..N_TASKS {
        let r = explain(&net, &s, task, CamLayer::TemporalVideoTask, OBS, None).unwrap();
        assert!(r.temporal.combined.iter().all(|v| v.is_finite()));
        assert!(r.spatial.data.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn bad_task_or_layer_rejected() {
    let cfg = config(6);
    let net = Network::<f32>::new(cfg.clone(), 8).unwrap();
    let s = sample(&cfg, 0, false);
    assert!(explain(&net, &s, N_TASKS, CamLayer::SpatialVideoTask, OBS, None).is_err());
    assert!(CamLayer::parse("head.0").is_err());
}

#[test]
fn results_round_trip_and_render() {
    let cfg = config(6);
    let net = Network::<f32>::new(cfg.clone(), 8).unwrap();
    let s = sample(&cfg, 3, false);
    let r = explain(&net, &s, 5, CamLayer::SpatialVideoTask, OBS, None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_saliency(dir.path(), &r).unwrap();
    let back = read_saliency(dir.path()).unwrap();
    assert_eq!(back.spatial, r.spatial);
    assert_eq!((back.task_id, back.layer), (5, CamLayer::SpatialVideoTask));
    for (a, b) in back.temporal.combined.iter().zip(&r.temporal.combined) {
        assert!((a - b).abs() < 1e-7);
    }
    let overlay = dir.path().join("overlay.png");
    write_overlay_png(&overlay, &s, &r, 2).unwrap();
    let img = image::open(&overlay).unwrap();
    assert_eq!((img.width(), img.height()), (2 * OUT_WIDTH as u32, OUT_HEIGHT as u32));
    let curve = dir.path().join("curve.png");
    write_curve_png(&curve, &r).unwrap();
    assert!(image::open(&curve).is_ok());
}

use proptest::prelude::*;

proptest! {
    #[test]
    fn upsampling_stays_within_source_range(
        (h, w, src) in (1usize..6, 1usize..6).prop_flat_map(|(h, w)| (Just(h), Just(w), proptest::collection::vec(0.0f64..10.0, h * w)))
    ) {
        let up = bilinear_upsample(&src, h, w, OUT_HEIGHT, OUT_WIDTH);
        let lo = src.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = src.iter().cloned().fold(0.0, f64::max);
        prop_assert!(up.iter().all(|&v| v >= lo - 1e-9 && v <= hi + 1e-9));
    }
}
