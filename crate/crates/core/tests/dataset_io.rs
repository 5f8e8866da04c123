use std::path::Path;

use gazefusion_core::{
    load_manifest, read_array, read_gaze_csv, split_by_participant, write_array, write_gaze_csv, Array, DatasetManifest,
    GazeSample, RecordRef, ScreenGeometry, Split, StimulusConfig, N_TASKS,
};
use proptest::prelude::*;

fn stimulus() -> StimulusConfig {
    StimulusConfig { duration_s: 2, fps: 2, gaze_hz: 10, ..Default::default() }
}

/// A dataset of `participants` x 2 trials with constant frames and gaze.
fn write_dataset(root: &Path, participants: usize) -> DatasetManifest {
    std::fs::create_dir_all(root.join("videos")).unwrap();
    std::fs::create_dir_all(root.join("gaze")).unwrap();
    let mut m = DatasetManifest::new(ScreenGeometry::default(), stimulus(), root);
    for v in 0..2 {
        let frames = Array::u8(vec![4, 3, 5, 3], vec![v as u8 * 100; 4 * 3 * 5 * 3]).unwrap();
        write_array(root.join(format!("videos/V{v}.arr")), &frames).unwrap();
    }
    for p in 0..participants {
        for v in 0..2 {
            let gaze: Vec<GazeSample> = (0..20)
                .map(|k| GazeSample { t: k as f64 / 10.0, x: 960.0, y: 540.0, pupil_mm: 3.0 + p as f64 * 0.1, valid: k != 3 })
                .collect();
            let rel = format!("gaze/P{p}_V{v}.csv");
            write_gaze_csv(root.join(&rel), &gaze).unwrap();
            m.records.push(RecordRef {
                participant_id: format!("P{p:02}"),
                video_id: format!("V{v}"),
                frames: format!("videos/V{v}.arr").into(),
                gaze: rel.into(),
                ratings: (0..N_TASKS).map(|d| 1 + ((p + v + d) % 7) as u8).collect(),
                ground_truth: None,
            });
        }
    }
    m.save(root.join("manifest.toml")).unwrap();
    m
}

#[test]
fn manifest_round_trips_through_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let written = write_dataset(tmp.path(), 3);
    let loaded = load_manifest(tmp.path().join("manifest.toml")).unwrap();
    assert_eq!(loaded.records, written.records);
    assert_eq!(loaded.stimulus, stimulus());
    let rec = loaded.load_record(&loaded.records[3]).unwrap();
    assert_eq!((rec.frames.frames, rec.frames.height, rec.frames.width), (4, 3, 5));
    assert!(rec.frames.data.iter().all(|&b| b == 100));
    assert_eq!(rec.gaze.len(), 20);
    assert!(!rec.gaze[3].valid && rec.gaze[4].valid);
    assert_eq!(rec.ratings.to_vec(), loaded.records[3].ratings);
}

#[test]
fn missing_file_is_reported_with_its_path() {
    let tmp = tempfile::tempdir().unwrap();
    write_dataset(tmp.path(), 3);
    std::fs::remove_file(tmp.path().join("gaze/P1_V0.csv")).unwrap();
    let e = load_manifest(tmp.path().join("manifest.toml")).unwrap_err().to_string();
    assert!(e.contains("P1_V0.csv"), "{e}");
}

#[test]
fn out_of_range_rating_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut m = write_dataset(tmp.path(), 3);
    m.records[0].ratings[4] = 8;
    m.save(tmp.path().join("manifest.toml")).unwrap();
    let e = load_manifest(tmp.path().join("manifest.toml")).unwrap_err().to_string();
    assert!(e.contains("outside 1..7"), "{e}");
}

#[test]
fn wrong_schema_version_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let mut m = write_dataset(tmp.path(), 3);
    m.schema_version = "0".into();
    m.save(tmp.path().join("manifest.toml")).unwrap();
    assert!(load_manifest(tmp.path().join("manifest.toml")).is_err());
}

#[test]
fn split_keeps_participants_whole() {
    let tmp = tempfile::tempdir().unwrap();
    let m = write_dataset(tmp.path(), 20);
    let s = split_by_participant(&m, (0.7, 0.15, 0.15), 4).unwrap();
    assert_eq!(s.counts(), (14, 3, 3));
    for r in &m.records {
        assert!(s.split_of(&r.participant_id).is_some());
    }
    let again = split_by_participant(&m, (0.7, 0.15, 0.15), 4).unwrap();
    assert_eq!(s, again);
    let other = split_by_participant(&m, (0.7, 0.15, 0.15), 5).unwrap();
    assert_ne!(s.members(Split::Test), other.members(Split::Test));
}

#[test]
fn gaze_csv_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let g = vec![
        GazeSample { t: 0.0, x: 1.5, y: 2.25, pupil_mm: 3.125, valid: true },
        GazeSample { t: 1.0 / 60.0, x: f64::NAN, y: f64::NAN, pupil_mm: 0.0, valid: false },
    ];
    let p = tmp.path().join("g.csv");
    write_gaze_csv(&p, &g).unwrap();
    let back = read_gaze_csv(&p).unwrap();
    assert_eq!(back[0], g[0]);
    assert_eq!(back[1].t, g[1].t);
    assert!(!back[1].valid);
}

proptest! {
    #[test]
    fn f32_arrays_round_trip(shape in proptest::collection::vec(1usize..5, 1..4), seed in 0u32..1000) {
        let n: usize = shape.iter().product();
        let data: Vec<f32> = (0..n).map(|i| (i as f32 + seed as f32) * 0.37 - 3.0).collect();
        let tmp = tempfile::tempdir().unwrap();
        let p = tmp.path().join("a.arr");
        write_array(&p, &Array::f32(shape.clone(), data.clone()).unwrap()).unwrap();
        let (s, d) = read_array(&p).unwrap().into_f32(None).unwrap();
        prop_assert_eq!(s, shape);
        prop_assert_eq!(d, data);
    }
}
