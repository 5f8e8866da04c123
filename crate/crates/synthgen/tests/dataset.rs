use std::collections::BTreeMap;
use std::path::Path;

use gazefusion_core::load_manifest;
use gazefusion_synthgen::{gen_dataset, Design, GroundTruth, RenderSpec, SynthConfig};

fn tiny(participants: usize, videos: usize, seed: u64) -> SynthConfig {
    SynthConfig {
        participants,
        videos,
        seed,
        render: RenderSpec { width: 16, height: 9, fps: 1, duration_s: 20 },
        ..Default::default()
    }
}

fn files(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for dir in ["", "videos", "gaze", "truth"] {
        for e in std::fs::read_dir(root.join(dir)).unwrap() {
            let p = e.unwrap().path();
            if p.is_file() {
                out.insert(p.strip_prefix(root).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn full_scale_layout_has_224_trials() {
    let dir = tempfile::tempdir().unwrap();
    let m = gen_dataset(&tiny(28, 16, 5), dir.path()).unwrap();
    assert_eq!(m.records.len(), 224);
    assert_eq!(m.participants().len(), 28);
    for p in m.participants() {
        assert_eq!(m.records.iter().filter(|r| r.participant_id == p).count(), 8);
    }
    let reloaded = load_manifest(dir.path().join("manifest.toml")).unwrap();
    assert_eq!(reloaded.records, m.records);
}

#[test]
fn minimum_dataset_is_valid_and_loadable() {
    let dir = tempfile::tempdir().unwrap();
    let m = gen_dataset(&tiny(3, 2, 1), dir.path()).unwrap();
    assert_eq!(m.records.len(), 6);
    m.validate().unwrap();
    let m = load_manifest(dir.path().join("manifest.toml")).unwrap();
    for r in &m.records {
        let rec = m.load_record(r).unwrap();
        assert_eq!(rec.frames.frames, 20);
        assert_eq!((rec.frames.height, rec.frames.width), (9, 16));
        assert_eq!(rec.gaze.len(), 20 * 60);
        let truth = GroundTruth::load(m.resolve(r.ground_truth.as_ref().unwrap())).unwrap();
        assert_eq!((truth.participant_id.as_str(), truth.video_id.as_str()), (r.participant_id.as_str(), r.video_id.as_str()));
        assert!(r.ratings.iter().all(|v| (1..=7).contains(v)));
    }
}

#[test]
fn same_seed_gives_byte_identical_dataset() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    gen_dataset(&tiny(4, 5, 9), a.path()).unwrap();
    gen_dataset(&tiny(4, 5, 9), b.path()).unwrap();
    gen_dataset(&tiny(4, 5, 10), c.path()).unwrap();
    let (fa, fb, fc) = (files(a.path()), files(b.path()), files(c.path()));
    assert!(fa.len() > 10);
    assert_eq!(fa, fb);
    assert_ne!(fa, fc);
}

#[test]
fn too_few_participants_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(gen_dataset(&tiny(2, 4, 1), dir.path()).is_err());
}

#[test]
fn localization_design_has_one_deciding_rectangle() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig { design: Design::Localization, views_per_participant: 6, ..tiny(3, 6, 2) };
    let m = gen_dataset(&cfg, dir.path()).unwrap();
    for r in &m.records {
        let t = GroundTruth::load(m.resolve(r.ground_truth.as_ref().unwrap())).unwrap();
        let natural: Vec<_> = t.scene.rects.iter().filter(|r| r.natural).collect();
        let v: usize = r.video_id[1..].parse().unwrap();
        assert_eq!(natural.len(), (v % 2 == 0) as usize);
        assert_eq!(t.scene.pan, 0.0);
    }
}

#[test]
fn first_impression_track_holds_for_ten_seconds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SynthConfig { design: Design::FirstImpression, ..tiny(3, 3, 2) };
    let m = gen_dataset(&cfg, dir.path()).unwrap();
    let t = GroundTruth::load(m.resolve(m.records[0].ground_truth.as_ref().unwrap())).unwrap();
    let track = &t.scene.brightness_track;
    assert_eq!(track.len(), 20);
    assert!(track[..10].iter().all(|&b| b == t.scene.params.brightness));
    assert!(track[10..].iter().any(|&b| b != t.scene.params.brightness));
}
