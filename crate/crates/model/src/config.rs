use gazefusion_core::{KvConfig, N_TASKS};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Architecture sizes. Both branches share `hidden` so recurrent weights can
/// be transferred between them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub n_tasks: usize,
    pub steps: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    pub pupil_size: usize,
    pub map_height: usize,
    pub map_width: usize,
    pub video_channels: Vec<usize>,
    pub pupil_channels: Vec<usize>,
    pub attention_channels: Vec<usize>,
    pub video_task_channels: usize,
    pub pupil_task_channels: usize,
    pub hidden: usize,
    pub shared_lstm_layers: usize,
    pub task_lstm_layers: usize,
    pub head_hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            n_tasks: N_TASKS,
            steps: 80,
            frame_height: 90,
            frame_width: 160,
            pupil_size: 32,
            map_height: 90,
            map_width: 160,
            video_channels: vec![16, 32, 64],
            pupil_channels: vec![16, 32],
            attention_channels: vec![16, 32, 64],
            video_task_channels: 32,
            pupil_task_channels: 16,
            hidden: 128,
            shared_lstm_layers: 2,
            task_lstm_layers: 1,
            head_hidden: 64,
        }
    }
}

impl ModelConfig {
    /// Tiny configuration for gradient checks and unit tests.
    pub fn miniature() -> Self {
        ModelConfig {
            n_tasks: N_TASKS,
            steps: 3,
            frame_height: 8,
            frame_width: 8,
            pupil_size: 8,
            map_height: 8,
            map_width: 8,
            video_channels: vec![2, 3, 4],
            pupil_channels: vec![2, 3],
            attention_channels: vec![2, 3, 4],
            video_task_channels: 4,
            pupil_task_channels: 2,
            hidden: 4,
            shared_lstm_layers: 2,
            task_lstm_layers: 1,
            head_hidden: 8,
        }
    }

    pub fn temporal_input(&self) -> usize {
        self.video_task_channels + self.pupil_task_channels
    }

    pub fn spatial_input(&self) -> usize {
        self.video_task_channels + self.attention_channels.last().copied().unwrap_or(0)
    }

    pub fn mmtm_bottleneck(&self) -> usize {
        (self.spatial_input() / 4).max(1)
    }

    /// Read `model.*` keys over the defaults. Channel lists are
    /// comma-separated.
    pub fn from_kv(kv: &KvConfig) -> Result<Self> {
        let d = Self::default();
        let num = |k: &str, v: usize| kv.get_or(&format!("model.{k}"), v).map_err(|e| Error::Config(e.to_string()));
        let list = |k: &str, v: &[usize]| -> Result<Vec<usize>> {
            match kv.get_str(&format!("model.{k}")) {
                None => Ok(v.to_vec()),
                Some(text) => text
                    .split(',')
                    .map(|p| p.trim().parse().map_err(|e| Error::Config(format!("model.{k} = {text:?}: {e}"))))
                    .collect(),
            }
        };
        let c = ModelConfig {
            n_tasks: N_TASKS,
            steps: num("steps", d.steps)?,
            frame_height: num("frame_height", d.frame_height)?,
            frame_width: num("frame_width", d.frame_width)?,
            pupil_size: num("pupil_size", d.pupil_size)?,
            map_height: num("map_height", d.map_height)?,
            map_width: num("map_width", d.map_width)?,
            video_channels: list("video_channels", &d.video_channels)?,
            pupil_channels: list("pupil_channels", &d.pupil_channels)?,
            attention_channels: list("attention_channels", &d.attention_channels)?,
            video_task_channels: num("video_task_channels", d.video_task_channels)?,
            pupil_task_channels: num("pupil_task_channels", d.pupil_task_channels)?,
            hidden: num("hidden", d.hidden)?,
            shared_lstm_layers: num("shared_lstm_layers", d.shared_lstm_layers)?,
            task_lstm_layers: num("task_lstm_layers", d.task_lstm_layers)?,
            head_hidden: num("head_hidden", d.head_hidden)?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_tasks != N_TASKS {
            return bad(&format!("n_tasks must be {N_TASKS}"));
        }
        let sizes = [
            self.steps,
            self.frame_height,
            self.frame_width,
            self.pupil_size,
            self.map_height,
            self.map_width,
            self.video_task_channels,
            self.pupil_task_channels,
            self.hidden,
            self.shared_lstm_layers,
            self.task_lstm_layers,
            self.head_hidden,
        ];
        if sizes.contains(&0) {
            return bad("all sizes must be positive");
        }
        for (name, ch) in
            [("video", &self.video_channels), ("pupil", &self.pupil_channels), ("attention", &self.attention_channels)]
        {
            if ch.is_empty() || ch.contains(&0) {
                return bad(&format!("{name} channels must be nonempty and positive"));
            }
        }
        let fits = |h: usize, w: usize, stages: usize| (h >> stages) > 0 && (w >> stages) > 0;
        if !fits(self.frame_height, self.frame_width, self.video_channels.len())
            || !fits(self.pupil_size, self.pupil_size, self.pupil_channels.len())
            || !fits(self.map_height, self.map_width, self.attention_channels.len())
        {
            return bad("inputs too small for the number of pooling stages");
        }
        Ok(())
    }
}
