//! On-disk layout of preprocessed samples.
//!
//! ```text
//! <out>/index.toml                  sample list, shapes, exclusions
//! <out>/labels.csv                  per-trial z-scores and binary labels
//! <out>/samples/<id>/frames.arr     f32 [T, 3, H, W]
//! <out>/samples/<id>/pupil.arr      f32 [T, 2, S, S]
//! <out>/samples/<id>/attention.arr  f32 [T, 1, H', W']
//! <out>/samples/<id>/meta.toml      ids and labels
//! ```

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use gazefusion_core::array::read_f32_shaped;
use gazefusion_core::{write_array, Array, DatasetManifest, N_TASKS};
use serde::{Deserialize, Serialize};

use crate::align::{align, AlignedSample};
use crate::attention::{attention_maps, sigma_pixels};
use crate::config::PreprocessConfig;
use crate::error::{Error, Result};
use crate::imaging::pupil_image_sequence;
use crate::labels::normalize_and_binarize;
use crate::pupil::clean_pupil;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMeta {
    pub id: String,
    pub participant_id: String,
    pub video_id: String,
    pub labels: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub participant_id: String,
    pub video_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleIndex {
    pub steps: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub pupil_size: usize,
    pub map_height: usize,
    pub map_width: usize,
    pub sigma_px: f64,
    #[serde(rename = "sample", default)]
    pub samples: Vec<SampleMeta>,
    #[serde(rename = "excluded", default)]
    pub excluded: Vec<Exclusion>,
}

/// Which gaze-derived streams a load should read.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    pub pupil: bool,
    pub attention: bool,
}

impl Streams {
    pub const ALL: Streams = Streams { pupil: true, attention: true };
    pub const VIDEO_ONLY: Streams = Streams { pupil: false, attention: false };
}

fn sample_id(participant: &str, video: &str) -> String {
    format!("{participant}__{video}")
}

/// Preprocess every manifest record into `out`.
///
/// Trials failing the pupil quality check are skipped and listed under
/// `excluded` in the index; every other error aborts.
pub fn preprocess_manifest(manifest: &DatasetManifest, cfg: &PreprocessConfig, out: &Path) -> Result<SampleIndex> {
    let stim = &manifest.stimulus;
    let steps = (stim.duration_s / cfg.window_s) as usize;
    let sigma = sigma_pixels(&manifest.geometry);
    let table = normalize_and_binarize(manifest.records.iter().map(|r| {
        let ratings: &[u8; N_TASKS] = r.ratings.as_slice().try_into().expect("validated manifest");
        (r.participant_id.as_str(), r.video_id.as_str(), ratings)
    }))?;
    std::fs::create_dir_all(out.join("samples"))?;
    let mut index = SampleIndex {
        steps,
        frame_height: cfg.work_height,
        frame_width: cfg.work_width,
        pupil_size: cfg.image_size,
        map_height: cfg.work_height,
        map_width: cfg.work_width,
        sigma_px: sigma,
        samples: Vec::new(),
        excluded: Vec::new(),
    };
    for r in &manifest.records {
        let record = manifest.load_record(r)?;
        let trace = match clean_pupil(&record.gaze, stim, cfg) {
            Ok(t) => t,
            Err(e @ Error::Quality { .. }) => {
                index.excluded.push(Exclusion {
                    participant_id: r.participant_id.clone(),
                    video_id: r.video_id.clone(),
                    reason: e.to_string(),
                });
                continue;
            }
            Err(e) => return Err(e),
        };
        let pupil = pupil_image_sequence(&trace, stim.duration_s, cfg.window_s, cfg.image_size, cfg.mtf_bins)?;
        let maps = attention_maps(
            &record.gaze,
            sigma,
            &manifest.geometry,
            stim.duration_s,
            cfg.window_s,
            cfg.work_height,
            cfg.work_width,
        )?;
        let labels = table.get(&r.participant_id, &r.video_id).expect("every record labelled").labels;
        let sample = align(&record, labels, &pupil, &maps, stim, cfg)?;
        let meta = write_sample(out, &sample)?;
        index.samples.push(meta);
    }
    std::fs::write(out.join("index.toml"), toml::to_string(&index).expect("index serializes"))?;
    write_label_csv(&out.join("labels.csv"), &table)?;
    Ok(index)
}

fn write_label_csv(path: &Path, table: &crate::labels::NormalizedLabelTable) -> Result<()> {
    let mut s = String::from("participant_id,video_id");
    for d in gazefusion_core::ACTIVE_DIMENSIONS {
        s.push_str(&format!(",z_{0},label_{0}", d.name));
    }
    s.push('\n');
    for row in &table.rows {
        s.push_str(&format!("{},{}", row.participant_id, row.video_id));
        for d in 0..N_TASKS {
            s.push_str(&format!(",{},{}", row.z[d], row.labels[d]));
        }
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn write_sample(out: &Path, s: &AlignedSample) -> Result<SampleMeta> {
    let id = sample_id(&s.participant_id, &s.video_id);
    let dir = out.join("samples").join(&id);
    std::fs::create_dir_all(&dir)?;
    write_array(dir.join("frames.arr"), &Array::f32(vec![s.steps, 3, s.frame_height, s.frame_width], s.frames.clone())?)?;
    if let Some(p) = &s.pupil {
        write_array(dir.join("pupil.arr"), &Array::f32(vec![s.steps, 2, s.pupil_size, s.pupil_size], p.clone())?)?;
    }
    if let Some(a) = &s.attention {
        write_array(dir.join("attention.arr"), &Array::f32(vec![s.steps, 1, s.map_height, s.map_width], a.clone())?)?;
    }
    let meta =
        SampleMeta { id, participant_id: s.participant_id.clone(), video_id: s.video_id.clone(), labels: s.labels.to_vec() };
    std::fs::write(dir.join("meta.toml"), toml::to_string(&meta).expect("meta serializes"))?;
    Ok(meta)
}

/// Read access to a preprocessed directory. Every file opened is recorded
/// so callers can prove which streams a run touched.
#[derive(Debug)]
pub struct SampleStore {
    root: PathBuf,
    pub index: SampleIndex,
    audit: Mutex<Vec<PathBuf>>,
}

impl SampleStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        let path = root.join("index.toml");
        let text = std::fs::read_to_string(&path).map_err(|e| gazefusion_core::Error::Load { path: path.clone(), source: e })?;
        let index: SampleIndex =
            toml::from_str(&text).map_err(|e| gazefusion_core::Error::Format(format!("{}: {e}", path.display())))?;
        Ok(SampleStore { root, index, audit: Mutex::new(Vec::new()) })
    }

    pub fn len(&self) -> usize {
        self.index.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.samples.is_empty()
    }

    pub fn meta(&self, i: usize) -> &SampleMeta {
        &self.index.samples[i]
    }

    pub fn audit_log(&self) -> Vec<PathBuf> {
        self.audit.lock().unwrap().clone()
    }

    pub fn clear_audit(&self) {
        self.audit.lock().unwrap().clear();
    }

    fn read(&self, path: PathBuf, shape: &[usize]) -> Result<Vec<f32>> {
        self.audit.lock().unwrap().push(path.clone());
        Ok(read_f32_shaped(path, shape)?)
    }

    pub fn load(&self, i: usize, streams: Streams) -> Result<AlignedSample> {
        let m = &self.index.samples[i];
        let ix = &self.index;
        let dir = self.root.join("samples").join(&m.id);
        let t = ix.steps;
        let frames = self.read(dir.join("frames.arr"), &[t, 3, ix.frame_height, ix.frame_width])?;
        let pupil =
            if streams.pupil { Some(self.read(dir.join("pupil.arr"), &[t, 2, ix.pupil_size, ix.pupil_size])?) } else { None };
        let attention = if streams.attention {
            Some(self.read(dir.join("attention.arr"), &[t, 1, ix.map_height, ix.map_width])?)
        } else {
            None
        };
        let labels: [u8; N_TASKS] = m
            .labels
            .as_slice()
            .try_into()
            .map_err(|_| Error::Invalid(format!("sample {} has {} labels", m.id, m.labels.len())))?;
        let s = AlignedSample {
            participant_id: m.participant_id.clone(),
            video_id: m.video_id.clone(),
            steps: t,
            frame_height: ix.frame_height,
            frame_width: ix.frame_width,
            frames,
            pupil_size: ix.pupil_size,
            pupil,
            map_height: ix.map_height,
            map_width: ix.map_width,
            attention,
            labels,
        };
        s.check()?;
        Ok(s)
    }
}
