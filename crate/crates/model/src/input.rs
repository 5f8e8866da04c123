//! Batching of aligned samples and substitution of missing modalities.

use gazefusion_core::N_TASKS;
use gazefusion_preprocess::AlignedSample;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// How a gaze-derived stream reaches the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fill {
    Observed,
    Zero,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalityPolicy {
    pub pupil: Fill,
    pub attention: Fill,
}

impl ModalityPolicy {
    pub const OBSERVED: ModalityPolicy = ModalityPolicy { pupil: Fill::Observed, attention: Fill::Observed };

    pub fn needs_stats(&self) -> bool {
        self.pupil == Fill::Mean || self.attention == Fill::Mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InferenceMode {
    FullMultimodal,
    VideoOnlyZero,
    VideoOnlyMeanFill,
}

impl InferenceMode {
    pub fn policy(self) -> ModalityPolicy {
        match self {
            InferenceMode::FullMultimodal => ModalityPolicy::OBSERVED,
            InferenceMode::VideoOnlyZero => ModalityPolicy { pupil: Fill::Zero, attention: Fill::Zero },
            InferenceMode::VideoOnlyMeanFill => ModalityPolicy { pupil: Fill::Mean, attention: Fill::Mean },
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InferenceMode::FullMultimodal => "full",
            InferenceMode::VideoOnlyZero => "video-only-zero",
            InferenceMode::VideoOnlyMeanFill => "video-only-mean",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(InferenceMode::FullMultimodal),
            "video-only-zero" => Some(InferenceMode::VideoOnlyZero),
            "video-only-mean" => Some(InferenceMode::VideoOnlyMeanFill),
            _ => None,
        }
    }
}

/// Training-set mean pupil image and attention map, used for mean fill.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityStats {
    /// `[2][S][S]`
    pub pupil: Vec<f32>,
    /// `[H'][W']`
    pub attention: Vec<f32>,
}

impl ModalityStats {
    /// Mean over all samples and timesteps. Every sample must carry both streams.
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a AlignedSample>) -> Result<Self> {
        let mut pupil: Vec<f64> = Vec::new();
        let mut attention: Vec<f64> = Vec::new();
        let mut count = 0usize;
        for s in samples {
            let (Some(p), Some(a)) = (&s.pupil, &s.attention) else {
                return Err(Error::Mode(format!("sample {}/{} lacks gaze streams", s.participant_id, s.video_id)));
            };
            if pupil.is_empty() {
                pupil = vec![0.0; s.pupil_len()];
                attention = vec![0.0; s.map_len()];
            }
            if p.len() != s.steps * pupil.len() || a.len() != s.steps * attention.len() {
                return Err(Error::Shape("samples disagree on stream sizes".into()));
            }
            for img in p.chunks(pupil.len()) {
                pupil.iter_mut().zip(img).for_each(|(m, &v)| *m += v as f64);
            }
            for map in a.chunks(attention.len()) {
                attention.iter_mut().zip(map).for_each(|(m, &v)| *m += v as f64);
            }
            count += s.steps;
        }
        if count == 0 {
            return Err(Error::Mode("no samples to compute modality statistics".into()));
        }
        let n = count as f64;
        Ok(ModalityStats {
            pupil: pupil.into_iter().map(|v| (v / n) as f32).collect(),
            attention: attention.into_iter().map(|v| (v / n) as f32).collect(),
        })
    }
}

/// A batch in network layout. Image index `n = b * steps + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchInput<F> {
    pub batch: usize,
    pub steps: usize,
    /// `[n][3][H][W]`
    pub frames: Vec<F>,
    /// `[n][2][S][S]`
    pub pupil: Vec<F>,
    /// `[n][1][H'][W']`
    pub attention: Vec<F>,
    pub labels: Vec<[u8; N_TASKS]>,
}

impl<F: Scalar> BatchInput<F> {
    pub fn images(&self) -> usize {
        self.batch * self.steps
    }

    pub fn from_samples(
        samples: &[&AlignedSample],
        cfg: &ModelConfig,
        policy: ModalityPolicy,
        stats: Option<&ModalityStats>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Shape("empty batch".into()));
        }
        if policy.needs_stats() && stats.is_none() {
            return Err(Error::Mode("mean fill requires modality statistics".into()));
        }
        let t = cfg.steps;
        let (fl, pl, ml) =
            (3 * cfg.frame_height * cfg.frame_width, 2 * cfg.pupil_size * cfg.pupil_size, cfg.map_height * cfg.map_width);
        let n = samples.len() * t;
        let mut out = BatchInput {
            batch: samples.len(),
            steps: t,
            frames: Vec::with_capacity(n * fl),
            pupil: Vec::with_capacity(n * pl),
            attention: Vec::with_capacity(n * ml),
            labels: Vec::with_capacity(samples.len()),
        };
        for s in samples {
            if s.steps != t
                || s.frame_len() != fl
                || s.frame_height != cfg.frame_height
                || s.pupil_len() != pl
                || s.map_height != cfg.map_height
                || s.map_len() != ml
            {
                return Err(Error::Shape(format!(
                    "sample {}/{} is {} steps of {}x{} frames, {}px pupil images, {}x{} maps; model expects {} steps of {}x{}, {}px, {}x{}",
                    s.participant_id,
                    s.video_id,
                    s.steps,
                    s.frame_height,
                    s.frame_width,
                    s.pupil_size,
                    s.map_height,
                    s.map_width,
                    t,
                    cfg.frame_height,
                    cfg.frame_width,
                    cfg.pupil_size,
                    cfg.map_height,
                    cfg.map_width
                )));
            }
            if s.frames.len() != t * fl {
                return Err(Error::Shape("frame stack length".into()));
            }
            out.frames.extend(s.frames.iter().map(|&v| F::of(v)));
            fill_stream(&mut out.pupil, policy.pupil, s.pupil.as_deref(), stats.map(|m| m.pupil.as_slice()), t, pl, "pupil")?;
            fill_stream(
                &mut out.attention,
                policy.attention,
                s.attention.as_deref(),
                stats.map(|m| m.attention.as_slice()),
                t,
                ml,
                "attention",
            )?;
            out.labels.push(s.labels);
        }
        Ok(out)
    }
}

fn fill_stream<F: Scalar>(
    dst: &mut Vec<F>,
    fill: Fill,
    observed: Option<&[f32]>,
    mean: Option<&[f32]>,
    steps: usize,
    len: usize,
    name: &str,
) -> Result<()> {
    match fill {
        Fill::Observed => {
            let v = observed.ok_or_else(|| Error::Mode(format!("{name} stream required but not loaded")))?;
            if v.len() != steps * len {
                return Err(Error::Shape(format!("{name} stream length")));
            }
            dst.extend(v.iter().map(|&x| F::of(x)));
        }
        Fill::Zero => dst.extend(std::iter::repeat_n(F::zero(), steps * len)),
        Fill::Mean => {
            let m = mean.ok_or_else(|| Error::Mode("mean fill requires modality statistics".into()))?;
            if m.len() != len {
                return Err(Error::Shape(format!("{name} statistics length")));
            }
            for _ in 0..steps {
                dst.extend(m.iter().map(|&x| F::of(x)));
            }
        }
    }
    Ok(())
}
