//! Whole-dataset generation.
//!
//! ```text
//! <out>/manifest.toml
//! <out>/videos/V00.arr        u8 [frames, H, W, 3]
//! <out>/gaze/P00_V00.csv
//! <out>/truth/P00_V00.toml    generator ground truth, never read by the pipeline
//! ```

use std::path::Path;

use gazefusion_core::{write_array, write_gaze_csv, Array, DatasetManifest, RecordRef, ScreenGeometry, StimulusConfig};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaze::{gen_gaze, GazeStats};
use crate::labels::gen_labels;
use crate::observer::{SimObserver, TrialLatents};
use crate::scene::{build_scene, pick_color, render, salience, Rect, RenderSpec, Scene, SceneParams};
use crate::seed;

/// How videos are constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Design {
    /// Random scene factors per video.
    Standard,
    /// Static scenes in which one fixed rectangle alone decides naturalness:
    /// it is natural in even-numbered videos and artificial otherwise, and
    /// every other rectangle is artificial.
    Localization,
    /// Room light during the first ten seconds decides the light rating;
    /// afterwards it changes at random every two seconds.
    FirstImpression,
}

impl Design {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Design::Standard),
            "localization" => Ok(Design::Localization),
            "first-impression" => Ok(Design::FirstImpression),
            other => Err(Error::Invalid(format!("unknown design {other:?}"))),
        }
    }
}

/// Screen-space box of the deciding rectangle in the localization design.
pub const LOCALIZATION_TARGET: (f64, f64, f64, f64) = (0.6, 0.25, 0.28, 0.45);
/// Seconds of the first-impression design that decide the label.
pub const FIRST_IMPRESSION_S: u32 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub participants: usize,
    pub videos: usize,
    /// Videos shown to each participant; capped at `videos`.
    pub views_per_participant: usize,
    pub seed: u64,
    pub render: RenderSpec,
    pub gaze_hz: u32,
    pub geometry: ScreenGeometry,
    pub design: Design,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            participants: 28,
            videos: 16,
            views_per_participant: 8,
            seed: 0,
            render: RenderSpec::default(),
            gaze_hz: 60,
            geometry: ScreenGeometry::default(),
            design: Design::Standard,
        }
    }
}

impl SynthConfig {
    pub fn stimulus(&self) -> StimulusConfig {
        StimulusConfig { duration_s: self.render.duration_s, fps: self.render.fps, gaze_hz: self.gaze_hz, ..Default::default() }
    }

    pub fn views(&self) -> usize {
        self.views_per_participant.min(self.videos)
    }

    pub fn validate(&self) -> Result<()> {
        if self.participants < 3 {
            return Err(Error::Invalid(format!("need at least 3 participants, got {}", self.participants)));
        }
        if self.videos == 0 || self.views() < 2 {
            return Err(Error::Invalid("each participant must view at least 2 videos".into()));
        }
        if self.gaze_hz == 0 {
            return Err(Error::Invalid("gaze rate must be positive".into()));
        }
        self.render.validate()?;
        self.geometry.validate()?;
        if self.design == Design::FirstImpression && self.render.duration_s <= FIRST_IMPRESSION_S {
            return Err(Error::Invalid(format!("first-impression clips must be longer than {FIRST_IMPRESSION_S} s")));
        }
        Ok(())
    }
}

/// Sidecar contents for one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub participant_id: String,
    pub video_id: String,
    pub design: Design,
    pub latents: TrialLatents,
    pub gaze: GazeStats,
    pub observer: SimObserver,
    pub scene: Scene,
}

impl GroundTruth {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text =
            std::fs::read_to_string(path).map_err(|e| gazefusion_core::Error::Load { path: path.to_path_buf(), source: e })?;
        toml::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))
    }
}

fn localization_scene(v: usize, seed: u64) -> Result<Scene> {
    let mut rng = seed::rng(seed, seed::SCENE, v as u64);
    let natural = v % 2 == 0;
    let brightness = rng.random_range(0.35..0.65);
    let params = SceneParams {
        brightness,
        clutter_count: 4,
        alignment: 0.0,
        natural_fraction: if natural { 1.0 } else { 0.0 },
        style_seed: rng.random(),
    };
    params.validate()?;
    let (tx, ty, tw, th) = LOCALIZATION_TARGET;
    let mut rects = Vec::new();
    for _ in 0..3 {
        let w = rng.random_range(0.08..0.16);
        let h = rng.random_range(0.12..0.3);
        let x = rng.random_range(0.02..0.5 - w);
        let y = rng.random_range(0.05..0.95 - h);
        let color = pick_color(&mut rng, false);
        let s = salience(&mut rng, w, h, color, brightness);
        rects.push(Rect { x, y, w, h, color, natural: false, salience: s });
    }
    let color = pick_color(&mut rng, natural);
    let s = salience(&mut rng, tw, th, color, brightness);
    rects.push(Rect { x: tx, y: ty, w: tw, h: th, color, natural, salience: s });
    Ok(Scene { params, rects, pan: 0.0, brightness_track: Vec::new() })
}

fn video_scene(cfg: &SynthConfig, v: usize) -> Result<Scene> {
    let mut rng = seed::rng(cfg.seed, seed::SCENE, v as u64);
    match cfg.design {
        Design::Standard => build_scene(SceneParams::sample(&mut rng), cfg.seed),
        Design::Localization => localization_scene(v, cfg.seed),
        Design::FirstImpression => {
            let mut scene = build_scene(SceneParams::sample(&mut rng), cfg.seed)?;
            let first = scene.params.brightness;
            let mut track = Vec::with_capacity(cfg.render.duration_s as usize);
            let mut level = first;
            for s in 0..cfg.render.duration_s {
                if s >= FIRST_IMPRESSION_S && (s - FIRST_IMPRESSION_S) % 2 == 0 {
                    level = rng.random_range(0.05..0.95);
                }
                track.push(level);
            }
            scene.brightness_track = track;
            Ok(scene)
        }
    }
}

/// Generate a dataset under `out` and return its manifest (also saved as
/// `out/manifest.toml`). Output bytes depend only on `cfg`.
pub fn gen_dataset(cfg: &SynthConfig, out: &Path) -> Result<DatasetManifest> {
    cfg.validate()?;
    for d in ["videos", "gaze", "truth"] {
        std::fs::create_dir_all(out.join(d))?;
    }
    let stimulus = cfg.stimulus();
    let mut manifest = DatasetManifest::new(cfg.geometry, stimulus, out);
    let views = cfg.views();
    let viewers: Vec<Vec<usize>> = (0..cfg.participants)
        .map(|p| {
            let mut rng = seed::rng(cfg.seed, seed::VIEWS, p as u64);
            let mut s = sample(&mut rng, cfg.videos, views).into_vec();
            s.sort_unstable();
            s
        })
        .collect();
    let observers: Vec<SimObserver> = (0..cfg.participants)
        .map(|p| SimObserver::sample(format!("P{p:02}"), &mut seed::rng(cfg.seed, seed::OBSERVER, p as u64)))
        .collect();
    for v in 0..cfg.videos {
        let video_id = format!("V{v:02}");
        let watchers: Vec<usize> = (0..cfg.participants).filter(|p| viewers[*p].contains(&v)).collect();
        if watchers.is_empty() {
            continue;
        }
        let scene = video_scene(cfg, v)?;
        let frames = render(&scene, &cfg.render)?;
        let video_rel = format!("videos/{video_id}.arr");
        write_array(out.join(&video_rel), &Array::u8(vec![frames.frames, frames.height, frames.width, 3], frames.data.clone())?)?;
        for p in watchers {
            let observer = &observers[p];
            let trial = seed::derive(cfg.seed, seed::TRIAL, (p * cfg.videos + v) as u64);
            let latents = TrialLatents::sample(&mut seed::rng(trial, seed::TRIAL, 0));
            let trace = gen_gaze(&scene, &frames, &stimulus, &cfg.geometry, observer, &latents, trial);
            let ratings = gen_labels(&scene.params, observer, &latents, trial);
            let key = format!("{}_{video_id}", observer.participant_id);
            let gaze_rel = format!("gaze/{key}.csv");
            write_gaze_csv(out.join(&gaze_rel), &trace.samples)?;
            let truth = GroundTruth {
                participant_id: observer.participant_id.clone(),
                video_id: video_id.clone(),
                design: cfg.design,
                latents,
                gaze: trace.stats,
                observer: observer.clone(),
                scene: scene.clone(),
            };
            let truth_rel = format!("truth/{key}.toml");
            std::fs::write(out.join(&truth_rel), toml::to_string(&truth).expect("ground truth serializes"))?;
            manifest.records.push(RecordRef {
                participant_id: observer.participant_id.clone(),
                video_id: video_id.clone(),
                frames: video_rel.clone().into(),
                gaze: gaze_rel.into(),
                ratings: ratings.to_vec(),
                ground_truth: Some(truth_rel.into()),
            });
        }
    }
    manifest.records.sort_by(|a, b| (&a.participant_id, &a.video_id).cmp(&(&b.participant_id, &b.video_id)));
    manifest.validate()?;
    manifest.save(out.join("manifest.toml"))?;
    Ok(manifest)
}
