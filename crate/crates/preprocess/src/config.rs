use gazefusion_core::{KvConfig, Result as CoreResult};
use serde::{Deserialize, Serialize};

/// Knobs for every preprocessing stage. Defaults follow common
/// eye-tracking practice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub window_s: u32,
    /// PAA length per window, i.e. pupil image side.
    pub image_size: usize,
    pub mtf_bins: usize,
    pub pupil_min_mm: f64,
    pub pupil_max_mm: f64,
    pub max_gap_ms: f64,
    pub smooth_ms: f64,
    pub baseline_ms: f64,
    pub min_valid_fraction: f64,
    pub work_width: usize,
    pub work_height: usize,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            window_s: 1,
            image_size: 32,
            mtf_bins: 8,
            pupil_min_mm: 1.5,
            pupil_max_mm: 9.0,
            max_gap_ms: 75.0,
            smooth_ms: 100.0,
            baseline_ms: 500.0,
            min_valid_fraction: 0.5,
            work_width: 160,
            work_height: 90,
        }
    }
}

impl PreprocessConfig {
    /// Read `preprocess.*` keys, falling back to defaults.
    pub fn from_kv(kv: &KvConfig) -> CoreResult<Self> {
        let d = Self::default();
        Ok(PreprocessConfig {
            window_s: kv.get_or("preprocess.window_s", d.window_s)?,
            image_size: kv.get_or("preprocess.image_size", d.image_size)?,
            mtf_bins: kv.get_or("preprocess.mtf_bins", d.mtf_bins)?,
            pupil_min_mm: kv.get_or("preprocess.pupil_min_mm", d.pupil_min_mm)?,
            pupil_max_mm: kv.get_or("preprocess.pupil_max_mm", d.pupil_max_mm)?,
            max_gap_ms: kv.get_or("preprocess.max_gap_ms", d.max_gap_ms)?,
            smooth_ms: kv.get_or("preprocess.smooth_ms", d.smooth_ms)?,
            baseline_ms: kv.get_or("preprocess.baseline_ms", d.baseline_ms)?,
            min_valid_fraction: kv.get_or("preprocess.min_valid_fraction", d.min_valid_fraction)?,
            work_width: kv.get_or("preprocess.work_width", d.work_width)?,
            work_height: kv.get_or("preprocess.work_height", d.work_height)?,
        })
    }
}
