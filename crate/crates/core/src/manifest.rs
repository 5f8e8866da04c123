//! Dataset manifest: a TOML document listing every participant x video trial.
//!
//! ```toml
//! schema_version = "1"
//!
//! [geometry]
//! width_px = 1920
//! height_px = 1080
//! diagonal_inches = 27.0
//! viewing_distance_cm = 65.0
//!
//! [stimulus]
//! duration_s = 80
//! fps = 30
//! gaze_hz = 60
//! fov_deg = 100.0
//!
//! [[record]]
//! participant_id = "P00"
//! video_id = "V03"
//! frames = "videos/V03.arr"        # u8 [T_raw, H, W, 3]
//! gaze = "gaze/P00_V03.csv"
//! ratings = [4, 5, 2, 6, 3, 4, 4, 5, 3, 6, 5, 4, 4, 5, 3]  # by dimension id
//! ground_truth = "truth/P00_V03.toml"   # optional, generator sidecar
//! ```
//!
//! Relative paths resolve against the manifest's directory.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::array::read_array;
use crate::config::{ScreenGeometry, StimulusConfig};
use crate::dims::{ACTIVE_DIMENSIONS, N_TASKS};
use crate::error::{Error, Result};
use crate::gaze::{read_gaze_csv, GazeSample};

pub const SCHEMA_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordRef {
    pub participant_id: String,
    pub video_id: String,
    pub frames: PathBuf,
    pub gaze: PathBuf,
    pub ratings: Vec<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<PathBuf>,
}

impl RecordRef {
    pub fn key(&self) -> String {
        format!("{}/{}", self.participant_id, self.video_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: String,
    #[serde(default)]
    pub geometry: ScreenGeometry,
    #[serde(default)]
    pub stimulus: StimulusConfig,
    #[serde(rename = "record", default)]
    pub records: Vec<RecordRef>,
    /// Directory relative paths resolve against; not serialized.
    #[serde(skip)]
    pub root: PathBuf,
}

/// Video frames, `[t][y][x][rgb]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

impl FrameStack {
    pub fn frame(&self, t: usize) -> &[u8] {
        let n = self.height * self.width * 3;
        &self.data[t * n..(t + 1) * n]
    }
}

/// One fully loaded trial.
#[derive(Debug, Clone)]
pub struct SequenceRecord {
    pub participant_id: String,
    pub video_id: String,
    pub frames: FrameStack,
    pub gaze: Vec<GazeSample>,
    pub ratings: [u8; N_TASKS],
}

impl DatasetManifest {
    pub fn new(geometry: ScreenGeometry, stimulus: StimulusConfig, root: impl Into<PathBuf>) -> Self {
        DatasetManifest { schema_version: SCHEMA_VERSION.to_string(), geometry, stimulus, records: Vec::new(), root: root.into() }
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn participants(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.records.iter().map(|r| r.participant_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Check every invariant that does not need the filesystem.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Validation(format!(
                "unsupported schema_version {:?} (expected {SCHEMA_VERSION:?})",
                self.schema_version
            )));
        }
        self.geometry.validate()?;
        self.stimulus.validate()?;
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert((r.participant_id.as_str(), r.video_id.as_str())) {
                return Err(Error::Validation(format!("duplicate record {}", r.key())));
            }
            if r.ratings.len() != N_TASKS {
                return Err(Error::Validation(format!(
                    "record {}: expected {N_TASKS} ratings, found {}",
                    r.key(),
                    r.ratings.len()
                )));
            }
            for (d, &v) in r.ratings.iter().enumerate() {
                if !(1..=7).contains(&v) {
                    return Err(Error::Validation(format!(
                        "record {}: rating {v} for dimension {} ({}) outside 1..7",
                        r.key(),
                        d,
                        ACTIVE_DIMENSIONS[d].name
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_files(&self) -> Result<()> {
        for r in &self.records {
            let mut paths = vec![&r.frames, &r.gaze];
            paths.extend(r.ground_truth.as_ref());
            for p in paths {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(Error::load(
                        full,
                        std::io::Error::new(std::io::ErrorKind::NotFound, format!("referenced by record {}", r.key())),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_toml()).map_err(|e| Error::load(path, e))
    }

    pub fn load_frames(&self, r: &RecordRef) -> Result<FrameStack> {
        let path = self.resolve(&r.frames);
        let (shape, data) = read_array(&path)?.into_u8(Some(4))?;
        if shape[3] != 3 {
            return Err(Error::Type(format!("{}: expected RGB frames, shape {shape:?}", path.display())));
        }
        Ok(FrameStack { frames: shape[0], height: shape[1], width: shape[2], data })
    }

    pub fn load_gaze(&self, r: &RecordRef) -> Result<Vec<GazeSample>> {
        read_gaze_csv(self.resolve(&r.gaze))
    }

    pub fn load_record(&self, r: &RecordRef) -> Result<SequenceRecord> {
        let mut ratings = [0u8; N_TASKS];
        ratings.copy_from_slice(&r.ratings);
        Ok(SequenceRecord {
            participant_id: r.participant_id.clone(),
            video_id: r.video_id.clone(),
            frames: self.load_frames(r)?,
            gaze: self.load_gaze(r)?,
            ratings,
        })
    }
}

/// Parse, validate, and check that every referenced file exists.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::load(path, e))?;
    let mut m: DatasetManifest = toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    m.validate()?;
    m.check_files()?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{write_array, Array};
    use crate::gaze::write_gaze_csv;

    fn fixture(dir: &Path, n: usize) -> DatasetManifest {
        let mut m = DatasetManifest::new(ScreenGeometry::default(), StimulusConfig::default(), dir);
        std::fs::create_dir_all(dir.join("v")).unwrap();
        write_array(dir.join("v/a.arr"), &Array::u8(vec![2, 2, 2, 3], vec![7; 24]).unwrap()).unwrap();
        for i in 0..n {
            let gaze = format!("g{i}.csv");
            write_gaze_csv(dir.join(&gaze), &[]).unwrap();
            m.records.push(RecordRef {
                participant_id: format!("P{}", i / 2),
                video_id: format!("V{}", i % 2),
                frames: "v/a.arr".into(),
                gaze: gaze.into(),
                ratings: vec![4; N_TASKS],
                ground_truth: None,
            });
        }
        m
    }

    #[test]
    fn valid_four_record_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let m = fixture(dir.path(), 4);
        let p = dir.path().join("manifest.toml");
        m.save(&p).unwrap();
        let loaded = load_manifest(&p).unwrap();
        assert_eq!(loaded.records.len(), 4);
        assert_eq!(loaded.records, m.records);
        let rec = loaded.load_record(&loaded.records[0]).unwrap();
        assert_eq!(rec.frames.frames, 2);
        assert_eq!(rec.ratings, [4; N_TASKS]);
    }

    #[test]
    fn out_of_range_rating_names_record_and_dimension() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = fixture(dir.path(), 4);
        m.records[2].ratings[3] = 9;
        let p = dir.path().join("manifest.toml");
        m.save(&p).unwrap();
        let err = load_manifest(&p).unwrap_err().to_string();
        assert!(err.contains("validation"), "{err}");
        assert!(err.contains("P1/V0"), "{err}");
        assert!(err.contains("naturalness"), "{err}");
    }

    #[test]
    fn missing_frame_file_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = fixture(dir.path(), 2);
        m.records[1].frames = "v/absent.arr".into();
        let p = dir.path().join("manifest.toml");
        m.save(&p).unwrap();
        match load_manifest(&p) {
            Err(Error::Load { path, .. }) => assert!(path.ends_with("v/absent.arr")),
            other => panic!("expected load error, got {other:?}"),
        }
        assert!(matches!(load_manifest(dir.path().join("nope.toml")), Err(Error::Load { .. })));
    }

    #[test]
    fn duplicates_and_schema_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = fixture(dir.path(), 2);
        m.records[1].participant_id = m.records[0].participant_id.clone();
        m.records[1].video_id = m.records[0].video_id.clone();
        assert!(matches!(m.validate(), Err(Error::Validation(_))));
        let mut m = fixture(dir.path(), 2);
        m.schema_version = "0".into();
        assert!(m.validate().is_err());
    }
}
