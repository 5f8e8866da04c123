#![allow(dead_code)]

use std::path::Path;

use gazefusion_core::{load_manifest, split_by_participant, SplitAssignment, N_TASKS};
use gazefusion_model::ModelConfig;
use gazefusion_preprocess::{preprocess_manifest, AlignedSample, PreprocessConfig, SampleStore};
use gazefusion_synthgen::{gen_dataset, RenderSpec, SynthConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn small_config() -> ModelConfig {
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
        video_task_channels: 6,
        pupil_task_channels: 4,
        hidden: 8,
        head_hidden: 8,
        ..ModelConfig::default()
    }
}

/// Random trials whose first label depends on mean frame brightness.
pub fn random_samples(cfg: &ModelConfig, n: usize, seed: u64) -> Vec<AlignedSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let t = cfg.steps;
            let level: f32 = rng.random();
            let frames = (0..t * 3 * cfg.frame_height * cfg.frame_width).map(|_| level * rng.random::<f32>()).collect();
            let pupil = (0..t * 2 * cfg.pupil_size * cfg.pupil_size).map(|_| rng.random_range(-1.0..1.0)).collect();
            let attention = (0..t * cfg.map_height * cfg.map_width).map(|_| rng.random::<f32>() / 50.0).collect();
            let mut labels: [u8; N_TASKS] = std::array::from_fn(|_| rng.random_range(0..2));
            labels[0] = (level > 0.5) as u8;
            AlignedSample {
                participant_id: format!("P{:02}", i % 5),
                video_id: format!("V{i:02}"),
                steps: t,
                frame_height: cfg.frame_height,
                frame_width: cfg.frame_width,
                frames,
                pupil_size: cfg.pupil_size,
                pupil: Some(pupil),
                map_height: cfg.map_height,
                map_width: cfg.map_width,
                attention: Some(attention),
                labels,
            }
        })
        .collect()
}

/// Generate and preprocess a small synthetic dataset at `small_config` sizes.
pub fn tiny_store(dir: &Path, participants: usize, videos: usize, seed: u64) -> (SampleStore, SplitAssignment) {
    let raw = dir.join("raw");
    let synth = SynthConfig {
        participants,
        videos,
        views_per_participant: videos,
        seed,
        render: RenderSpec { width: 32, height: 32, fps: 2, duration_s: 4 },
        ..Default::default()
    };
    gen_dataset(&synth, &raw).unwrap();
    let manifest = load_manifest(raw.join("manifest.toml")).unwrap();
    let pre = PreprocessConfig { work_width: 16, work_height: 16, image_size: 8, ..Default::default() };
    preprocess_manifest(&manifest, &pre, &dir.join("pre")).unwrap();
    let split = split_by_participant(&manifest, (0.6, 0.2, 0.2), seed).unwrap();
    (SampleStore::open(dir.join("pre")).unwrap(), split)
}
