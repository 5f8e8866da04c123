use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical display setup; needed to convert visual angle to pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScreenGeometry {
    pub width_px: u32,
    pub height_px: u32,
    pub diagonal_inches: f64,
    /// Not recorded with the original stimuli; 65 cm is a typical desktop
    /// eye-tracker distance.
    pub viewing_distance_cm: f64,
}

impl Default for ScreenGeometry {
    fn default() -> Self {
        ScreenGeometry { width_px: 1920, height_px: 1080, diagonal_inches: 27.0, viewing_distance_cm: 65.0 }
    }
}

impl ScreenGeometry {
    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::Validation("screen size must be positive".into()));
        }
        if !(self.diagonal_inches > 0.0) {
            return Err(Error::Validation("screen diagonal must be positive".into()));
        }
        // zero distance is allowed as the degenerate limit (sigma = 0)
        if !(self.viewing_distance_cm >= 0.0) {
            return Err(Error::Validation("viewing distance must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Stimulus timing and recording rates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusConfig {
    pub duration_s: u32,
    pub fps: u32,
    pub gaze_hz: u32,
    /// Horizontal field of view the walkthrough was rendered with. Carried
    /// as metadata only; nothing derives on-screen angles from it.
    pub fov_deg: f64,
}

impl Default for StimulusConfig {
    fn default() -> Self {
        StimulusConfig { duration_s: 80, fps: 30, gaze_hz: 60, fov_deg: 100.0 }
    }
}

impl StimulusConfig {
    pub fn nominal_frames(&self) -> usize {
        (self.duration_s * self.fps) as usize
    }

    pub fn nominal_gaze_samples(&self) -> usize {
        (self.duration_s * self.gaze_hz) as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.duration_s == 0 || self.fps == 0 || self.gaze_hz == 0 {
            return Err(Error::Validation("stimulus duration and rates must be positive".into()));
        }
        Ok(())
    }
}

/// Flat `key = value` configuration. `#` starts a comment; blank lines are
/// ignored; later keys override earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) =
                line.split_once('=').ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(Error::Config(format!("line {}: empty key", lineno + 1)));
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(KvConfig { entries })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::load(path, e))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|e| Error::Config(format!("{key} = {v:?}: {e}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Overlay `other` on top of `self`.
    pub fn merged(mut self, other: &KvConfig) -> Self {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
        self
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_parse_and_override() {
        let c = KvConfig::parse("# run\nseed = 7\nlr=0.001 # inline\n\nseed = 9\n").unwrap();
        assert_eq!(c.get::<u64>("seed").unwrap(), Some(9));
        assert_eq!(c.get::<f64>("lr").unwrap(), Some(0.001));
        assert_eq!(c.get::<u64>("missing").unwrap(), None);
        assert!(c.get::<u64>("lr").is_err());
        let mut flags = KvConfig::default();
        flags.set("seed", 1);
        assert_eq!(c.merged(&flags).get::<u64>("seed").unwrap(), Some(1));
        assert!(KvConfig::parse("novalue\n").is_err());
    }

    #[test]
    fn defaults_match_recording_setup() {
        let s = StimulusConfig::default();
        assert_eq!(s.nominal_frames(), 2400);
        assert_eq!(s.nominal_gaze_samples(), 4800);
        let g = ScreenGeometry::default();
        assert_eq!((g.width_px, g.height_px, g.diagonal_inches, g.viewing_distance_cm), (1920, 1080, 27.0, 65.0));
    }
}
