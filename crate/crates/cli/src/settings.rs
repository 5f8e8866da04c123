use std::fmt::Display;
use std::path::Path;

use gazefusion_core::{KvConfig, ScreenGeometry};
use gazefusion_model::ModelConfig;
use gazefusion_preprocess::PreprocessConfig;
use gazefusion_synthgen::{Design, RenderSpec, SynthConfig};
use gazefusion_train::TrainConfig;

use crate::{CliError, CliResult};

/// When set to a non-empty value, every command that would build or run
/// a network fails instead.
pub const DISABLE_MODEL_ENV: &str = "GAZEFUSION_DISABLE_MODEL";

pub fn model_enabled(stage: &'static str) -> CliResult<()> {
    match std::env::var(DISABLE_MODEL_ENV) {
        Ok(v) if !v.is_empty() => Err(CliError::new(stage, format!("model code path disabled by {DISABLE_MODEL_ENV}"))),
        _ => Ok(()),
    }
}

/// Config file entries with command-line flags laid over them.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub kv: KvConfig,
}

fn cfg_err(e: impl Display) -> CliError {
    CliError::new("config", e)
}

impl Settings {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let kv = match path {
            Some(p) => KvConfig::load(p).map_err(cfg_err)?,
            None => KvConfig::default(),
        };
        Ok(Settings { kv })
    }

    /// Record a flag; `None` keeps the file's value.
    pub fn flag<T: Display>(&mut self, key: &str, v: Option<T>) {
        if let Some(v) = v {
            self.kv.set(key, v);
        }
    }

    pub fn synth(&self) -> CliResult<SynthConfig> {
        let kv = &self.kv;
        let d = SynthConfig::default();
        let r = RenderSpec::default();
        let g = ScreenGeometry::default();
        let get = |e: gazefusion_core::Error| cfg_err(e);
        let design = match kv.get_str("synth.design") {
            Some(s) => Design::parse(s).map_err(cfg_err)?,
            None => d.design,
        };
        Ok(SynthConfig {
            participants: kv.get_or("synth.participants", d.participants).map_err(get)?,
            videos: kv.get_or("synth.videos", d.videos).map_err(get)?,
            views_per_participant: kv.get_or("synth.views", d.views_per_participant).map_err(get)?,
            seed: kv.get_or("synth.seed", d.seed).map_err(get)?,
            render: RenderSpec {
                width: kv.get_or("synth.width", r.width).map_err(get)?,
                height: kv.get_or("synth.height", r.height).map_err(get)?,
                fps: kv.get_or("synth.fps", r.fps).map_err(get)?,
                duration_s: kv.get_or("synth.duration_s", r.duration_s).map_err(get)?,
            },
            gaze_hz: kv.get_or("synth.gaze_hz", d.gaze_hz).map_err(get)?,
            geometry: ScreenGeometry {
                width_px: kv.get_or("screen.width_px", g.width_px).map_err(get)?,
                height_px: kv.get_or("screen.height_px", g.height_px).map_err(get)?,
                diagonal_inches: kv.get_or("screen.diagonal_inches", g.diagonal_inches).map_err(get)?,
                viewing_distance_cm: kv.get_or("screen.viewing_distance_cm", g.viewing_distance_cm).map_err(get)?,
            },
            design,
        })
    }

    pub fn preprocess(&self) -> CliResult<PreprocessConfig> {
        PreprocessConfig::from_kv(&self.kv).map_err(cfg_err)
    }

    pub fn model(&self) -> CliResult<ModelConfig> {
        ModelConfig::from_kv(&self.kv).map_err(cfg_err)
    }

    pub fn train(&self) -> CliResult<TrainConfig> {
        let c = TrainConfig::from_kv(&self.kv).map_err(cfg_err)?;
        c.validate().map_err(cfg_err)?;
        Ok(c)
    }

    pub fn split(&self) -> CliResult<((f64, f64, f64), u64)> {
        let kv = &self.kv;
        let r = (
            kv.get_or("split.train", 0.70).map_err(cfg_err)?,
            kv.get_or("split.val", 0.15).map_err(cfg_err)?,
            kv.get_or("split.test", 0.15).map_err(cfg_err)?,
        );
        Ok((r, kv.get_or("split.seed", 0u64).map_err(cfg_err)?))
    }
}
