use gazefusion_core::manifest::FrameStack;
use gazefusion_core::{SequenceRecord, StimulusConfig, N_TASKS};

use crate::attention::AttentionMapSequence;
use crate::config::PreprocessConfig;
use crate::error::{Error, Result};
use crate::imaging::PupilImageSequence;

/// A model-ready trial. All streams share `steps` one-second windows.
///
/// Gaze-derived streams are optional: a loader asked for video only leaves
/// them `None` and the model substitutes them according to its inference
/// mode.
#[derive(Debug, Clone, PartialEq)]
pub struct AlignedSample {
    pub participant_id: String,
    pub video_id: String,
    pub steps: usize,
    pub frame_height: usize,
    pub frame_width: usize,
    /// `[t][rgb][row][col]` in [0, 1]
    pub frames: Vec<f32>,
    pub pupil_size: usize,
    /// `[t][gasf|mtf][row][col]`
    pub pupil: Option<Vec<f32>>,
    pub map_height: usize,
    pub map_width: usize,
    /// `[t][row][col]`
    pub attention: Option<Vec<f32>>,
    pub labels: [u8; N_TASKS],
}

impl AlignedSample {
    pub fn frame_len(&self) -> usize {
        3 * self.frame_height * self.frame_width
    }

    pub fn pupil_len(&self) -> usize {
        2 * self.pupil_size * self.pupil_size
    }

    pub fn map_len(&self) -> usize {
        self.map_height * self.map_width
    }

    pub fn check(&self) -> Result<()> {
        let t = self.steps;
        if self.frames.len() != t * self.frame_len() {
            return Err(Error::Alignment(format!("frames hold {} values, expected {}", self.frames.len(), t * self.frame_len())));
        }
        if let Some(p) = &self.pupil {
            if p.len() != t * self.pupil_len() {
                return Err(Error::Alignment("pupil image stack does not match step count".into()));
            }
        }
        if let Some(a) = &self.attention {
            if a.len() != t * self.map_len() {
                return Err(Error::Alignment("attention map stack does not match step count".into()));
            }
        }
        if self.labels.iter().any(|&l| l > 1) {
            return Err(Error::Alignment("labels must be binary".into()));
        }
        Ok(())
    }
}

/// Index of the frame representing window `t`: the middle frame of the
/// window, clamped to the last frame actually present.
pub fn frame_index(t: usize, fps: u32, window_s: u32, available: usize) -> usize {
    let per = (fps * window_s) as usize;
    (t * per + per / 2).min(available.saturating_sub(1))
}

/// Per-axis box-filter weights: `(first source index, weights)` per output.
fn area_weights(src: usize, dst: usize) -> Vec<(usize, Vec<f32>)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|j| {
            let (a, b) = (j as f64 * scale, (j + 1) as f64 * scale);
            let first = a.floor() as usize;
            let last = ((b.ceil() as usize).min(src)).max(first + 1);
            let w = (first..last).map(|i| ((b.min(i as f64 + 1.0) - a.max(i as f64)).max(0.0) / scale) as f32).collect();
            (first, w)
        })
        .collect()
}

/// Area-resample an interleaved RGB u8 frame to planar `[3][h][w]` in [0, 1].
pub fn resize_frame(src: &[u8], sh: usize, sw: usize, dh: usize, dw: usize) -> Vec<f32> {
    let (wy, wx) = (area_weights(sh, dh), area_weights(sw, dw));
    // horizontal pass into [row][dw][3]
    let mut tmp = vec![0f32; sh * dw * 3];
    for y in 0..sh {
        for (j, (first, w)) in wx.iter().enumerate() {
            for (k, &wk) in w.iter().enumerate() {
                let s = (y * sw + first + k) * 3;
                for c in 0..3 {
                    tmp[(y * dw + j) * 3 + c] += wk * src[s + c] as f32;
                }
            }
        }
    }
    let mut out = vec![0f32; 3 * dh * dw];
    for (i, (first, w)) in wy.iter().enumerate() {
        for (k, &wk) in w.iter().enumerate() {
            let row = &tmp[(first + k) * dw * 3..(first + k + 1) * dw * 3];
            for j in 0..dw {
                for c in 0..3 {
                    out[(c * dh + i) * dw + j] += wk * row[j * 3 + c];
                }
            }
        }
    }
    out.iter_mut().for_each(|v| *v /= 255.0);
    out
}

/// Sample the video once per window and bundle it with the gaze streams.
pub fn align_frames(frames: &FrameStack, steps: usize, stimulus: &StimulusConfig, cfg: &PreprocessConfig) -> Result<Vec<f32>> {
    if frames.frames == 0 {
        return Err(Error::Alignment("video has no frames".into()));
    }
    let mut out = Vec::with_capacity(steps * 3 * cfg.work_height * cfg.work_width);
    for t in 0..steps {
        let idx = frame_index(t, stimulus.fps, cfg.window_s, frames.frames);
        out.extend(resize_frame(frames.frame(idx), frames.height, frames.width, cfg.work_height, cfg.work_width));
    }
    Ok(out)
}

pub fn align(
    record: &SequenceRecord,
    labels: [u8; N_TASKS],
    pupil: &PupilImageSequence,
    attention: &AttentionMapSequence,
    stimulus: &StimulusConfig,
    cfg: &PreprocessConfig,
) -> Result<AlignedSample> {
    let steps = (stimulus.duration_s / cfg.window_s) as usize;
    if pupil.windows != steps {
        return Err(Error::Alignment(format!("pupil images cover {} windows, video covers {steps}", pupil.windows)));
    }
    if attention.windows != steps {
        return Err(Error::Alignment(format!("attention maps cover {} windows, video covers {steps}", attention.windows)));
    }
    let sample = AlignedSample {
        participant_id: record.participant_id.clone(),
        video_id: record.video_id.clone(),
        steps,
        frame_height: cfg.work_height,
        frame_width: cfg.work_width,
        frames: align_frames(&record.frames, steps, stimulus, cfg)?,
        pupil_size: pupil.size,
        pupil: Some(pupil.data.clone()),
        map_height: attention.height,
        map_width: attention.width,
        attention: Some(attention.data.clone()),
        labels,
    };
    sample.check()?;
    Ok(sample)
}
