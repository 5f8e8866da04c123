use std::path::Path;

use gazefusion_core::{
    write_array, write_gaze_csv, Array, DatasetManifest, GazeSample, RecordRef, ScreenGeometry, StimulusConfig, N_TASKS,
};
use gazefusion_preprocess::{gaf, mtf, paa, preprocess_manifest, PreprocessConfig, SampleStore, Streams};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const DURATION: u32 = 4;
const GAZE_HZ: u32 = 30;

fn cfg() -> PreprocessConfig {
    PreprocessConfig { work_width: 16, work_height: 9, image_size: 6, mtf_bins: 3, ..Default::default() }
}

/// Three participants x two videos; P02 on V01 loses most of its gaze.
fn write_dataset(root: &Path) -> DatasetManifest {
    std::fs::create_dir_all(root.join("videos")).unwrap();
    std::fs::create_dir_all(root.join("gaze")).unwrap();
    let stim = StimulusConfig { duration_s: DURATION, fps: 2, gaze_hz: GAZE_HZ, ..Default::default() };
    let mut m = DatasetManifest::new(ScreenGeometry::default(), stim, root);
    let (w, h, n) = (32, 18, (DURATION * 2) as usize);
    for v in 0..2u8 {
        let data: Vec<u8> = (0..n * h * w * 3).map(|i| ((i / 3) % w) as u8 * 7 + v * 10).collect();
        write_array(root.join(format!("videos/V{v:02}.arr")), &Array::u8(vec![n, h, w, 3], data).unwrap()).unwrap();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for p in 0..3 {
        for v in 0..2 {
            let lost = p == 2 && v == 1;
            let gaze: Vec<GazeSample> = (0..(DURATION * GAZE_HZ) as usize)
                .map(|k| GazeSample {
                    t: k as f64 / GAZE_HZ as f64,
                    x: rng.random_range(200.0..1700.0),
                    y: rng.random_range(100.0..900.0),
                    pupil_mm: 4.0 + 0.5 * (k as f64 / 9.0).sin(),
                    valid: !lost || k % 5 == 0,
                })
                .collect();
            let rel = format!("gaze/P{p:02}_V{v:02}.csv");
            write_gaze_csv(root.join(&rel), &gaze).unwrap();
            // dimension 0 rated 2 on V00 and 6 on V01 by everyone
            let ratings = (0..N_TASKS).map(|d| if d == 0 { 2 + 4 * v as u8 } else { 4 }).collect();
            m.records.push(RecordRef {
                participant_id: format!("P{p:02}"),
                video_id: format!("V{v:02}"),
                frames: format!("videos/V{v:02}.arr").into(),
                gaze: rel.into(),
                ratings,
                ground_truth: None,
            });
        }
    }
    m.save(root.join("manifest.toml")).unwrap();
    m
}

#[test]
fn preprocessing_writes_aligned_samples() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write_dataset(tmp.path());
    let out = tmp.path().join("pre");
    let index = preprocess_manifest(&m, &cfg(), &out).unwrap();
    assert_eq!(index.steps, DURATION as usize);
    assert_eq!((index.frame_height, index.frame_width, index.pupil_size), (9, 16, 6));
    assert_eq!(index.samples.len(), 5);
    assert_eq!(index.excluded.len(), 1);
    assert_eq!((index.excluded[0].participant_id.as_str(), index.excluded[0].video_id.as_str()), ("P02", "V01"));
    assert!(out.join("labels.csv").exists());

    let store = SampleStore::open(&out).unwrap();
    for i in 0..store.len() {
        let s = store.load(i, Streams::ALL).unwrap();
        s.check().unwrap();
        assert!(s.frames.iter().all(|v| (0.0..=1.0).contains(v)));
        let pupil = s.pupil.as_ref().unwrap();
        let side = s.pupil_size * s.pupil_size;
        for t in 0..s.steps {
            let gasf = &pupil[(2 * t) * side..(2 * t + 1) * side];
            let field = &pupil[(2 * t + 1) * side..(2 * t + 2) * side];
            assert!(gasf.iter().all(|v| (-1.0 - 1e-6..=1.0 + 1e-6).contains(v)));
            assert!(field.iter().all(|v| (0.0..=1.0).contains(v)));
            let map = &s.attention.as_ref().unwrap()[t * s.map_len()..(t + 1) * s.map_len()];
            assert!((map.iter().sum::<f32>() - 1.0).abs() < 1e-4);
        }
        let expected = (s.video_id == "V01") as u8;
        assert_eq!(s.labels[0], expected, "{}", s.video_id);
    }
}

#[test]
fn video_only_loads_touch_only_frames() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write_dataset(tmp.path());
    preprocess_manifest(&m, &cfg(), &tmp.path().join("pre")).unwrap();
    let store = SampleStore::open(tmp.path().join("pre")).unwrap();
    let s = store.load(0, Streams::VIDEO_ONLY).unwrap();
    assert!(s.pupil.is_none() && s.attention.is_none());
    let log = store.audit_log();
    assert_eq!(log.len(), 1);
    assert!(log[0].ends_with("frames.arr"));
}

#[test]
fn preprocessing_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write_dataset(tmp.path());
    preprocess_manifest(&m, &cfg(), &tmp.path().join("a")).unwrap();
    preprocess_manifest(&m, &cfg(), &tmp.path().join("b")).unwrap();
    for f in ["index.toml", "labels.csv", "samples/P00__V00/pupil.arr", "samples/P01__V01/attention.arr"] {
        assert_eq!(
            std::fs::read(tmp.path().join("a").join(f)).unwrap(),
            std::fs::read(tmp.path().join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn gaf_ignores_affine_rescaling() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..200 {
        let n = rng.random_range(2..24);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (a, b) = (rng.random_range(0.1..10.0), rng.random_range(-5.0..5.0));
        let y: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        for (p, q) in gaf(&x).unwrap().iter().zip(gaf(&y).unwrap()) {
            // acos amplifies rounding near the ends of [-1, 1]
            assert!((p - q).abs() < 1e-6);
        }
        // bins depend only on order, so the field is unchanged too
        assert_eq!(mtf(&x, 4).unwrap(), mtf(&y, 4).unwrap());
    }
}

#[test]
fn non_finite_window_rejected() {
    assert!(gaf(&[0.0, f64::NAN, 1.0]).is_err());
    assert!(mtf(&[0.0, f64::INFINITY, 1.0], 2).is_err());
    assert!(mtf(&[0.0], 2).is_err());
}

proptest! {
    #[test]
    fn gaf_is_symmetric_and_bounded(x in proptest::collection::vec(-100.0f64..100.0, 2..20)) {
        let s = x.len();
        let g = gaf(&x).unwrap();
        for i in 0..s {
            for j in 0..s {
                prop_assert_eq!(g[i * s + j], g[j * s + i]);
                prop_assert!(g[i * s + j].abs() <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn mtf_rows_of_bins_are_distributions(x in proptest::collection::vec(-10.0f64..10.0, 3..30), q in 2usize..6) {
        let s = x.len();
        let m = mtf(&x, q).unwrap();
        prop_assert!(m.iter().all(|v| (0.0..=1.0).contains(v)));
        // samples sharing a value share a bin, hence identical rows
        for i in 0..s {
            for j in 0..s {
                if x[i] == x[j] {
                    prop_assert_eq!(&m[i * s..(i + 1) * s], &m[j * s..(j + 1) * s]);
                }
            }
        }
    }

    #[test]
    fn paa_preserves_the_mean(x in proptest::collection::vec(-10.0f64..10.0, 1..60), seg in 1usize..20) {
        let seg = seg.min(x.len());
        let p = paa(&x, seg);
        prop_assert_eq!(p.len(), seg);
        let mean_x = x.iter().sum::<f64>() / x.len() as f64;
        let mean_p = p.iter().sum::<f64>() / seg as f64;
        prop_assert!((mean_x - mean_p).abs() < 1e-9);
    }
}
