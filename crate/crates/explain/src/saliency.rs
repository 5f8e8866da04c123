//! Grad-CAM maps and temporal gradient weights.
//!
//! ```text
//! <dir>/spatial.arr   f32 [T, 90, 160]
//! <dir>/temporal.arr  f32 [3, T]   rows: temporal branch, spatial branch, combined
//! <dir>/meta.toml     task, layer, sample ids
//! ```

use std::path::Path;

use gazefusion_core::{dims, read_array, write_array, Array, N_TASKS};
use gazefusion_model::{
    BatchInput, EvalMaps, FeatureGrads, Graph, KeepMaps, ModalityPolicy, ModalityStats, Network, Scalar, TaskMaps,
};
use gazefusion_preprocess::AlignedSample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Size every spatial map is resampled to.
pub const OUT_HEIGHT: usize = 90;
pub const OUT_WIDTH: usize = 160;

/// Convolution whose activations Grad-CAM weighs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CamLayer {
    #[serde(rename = "spatial.video_taskconv")]
    SpatialVideoTask,
    #[serde(rename = "temporal.video_taskconv")]
    TemporalVideoTask,
}

impl CamLayer {
    pub fn name(self) -> &'static str {
        match self {
            CamLayer::SpatialVideoTask => "spatial.video_taskconv",
            CamLayer::TemporalVideoTask => "temporal.video_taskconv",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "spatial.video_taskconv" => Ok(CamLayer::SpatialVideoTask),
            "temporal.video_taskconv" => Ok(CamLayer::TemporalVideoTask),
            other => Err(Error::Invalid(format!(
                "unknown layer {other:?}; expected spatial.video_taskconv or temporal.video_taskconv"
            ))),
        }
    }
}

/// `[T][OUT_HEIGHT][OUT_WIDTH]`, each timestep scaled to max 1 (or all zero).
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialMaps {
    pub steps: usize,
    pub data: Vec<f32>,
}

impl SpatialMaps {
    pub fn frame(&self, t: usize) -> &[f32] {
        &self.data[t * OUT_HEIGHT * OUT_WIDTH..(t + 1) * OUT_HEIGHT * OUT_WIDTH]
    }

    /// Intensity-weighted centre of one timestep in screen fractions
    /// `(x, y)`; `None` for an all-zero map.
    pub fn mass_center(&self, t: usize) -> Option<(f64, f64)> {
        let (mut s, mut sx, mut sy) = (0.0, 0.0, 0.0);
        for (i, &v) in self.frame(t).iter().enumerate() {
            let v = v as f64;
            s += v;
            sx += v * ((i % OUT_WIDTH) as f64 + 0.5);
            sy += v * ((i / OUT_WIDTH) as f64 + 0.5);
        }
        (s > 0.0).then(|| (sx / s / OUT_WIDTH as f64, sy / s / OUT_HEIGHT as f64))
    }
}

/// Per-timestep weights, each row summing to 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalWeights {
    pub temporal_branch: Vec<f64>,
    pub spatial_branch: Vec<f64>,
    /// Mean of the two branch curves.
    pub combined: Vec<f64>,
}

impl TemporalWeights {
    /// Share of combined mass in the first `steps` timesteps.
    pub fn early_mass(&self, steps: usize) -> f64 {
        self.combined.iter().take(steps).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaliencyResult {
    pub participant_id: String,
    pub video_id: String,
    pub task_id: usize,
    pub layer: CamLayer,
    pub spatial: SpatialMaps,
    pub temporal: TemporalWeights,
}

#[derive(Serialize, Deserialize)]
struct Meta {
    participant_id: String,
    video_id: String,
    task_id: usize,
    task_name: String,
    layer: CamLayer,
    steps: usize,
}

/// Bilinear resampling with pixel centres aligned (half-pixel offsets),
/// edges clamped.
pub fn bilinear_upsample(src: &[f64], sh: usize, sw: usize, dh: usize, dw: usize) -> Vec<f64> {
    let axis = |d: usize, s: usize| -> Vec<(usize, usize, f64)> {
        (0..d)
            .map(|i| {
                let x = ((i as f64 + 0.5) * s as f64 / d as f64 - 0.5).clamp(0.0, (s - 1) as f64);
                let i0 = x.floor() as usize;
                let i1 = (i0 + 1).min(s - 1);
                (i0, i1, x - i0 as f64)
            })
            .collect()
    };
    let (ys, xs) = (axis(dh, sh), axis(dw, sw));
    let mut out = Vec::with_capacity(dh * dw);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            let top = src[y0 * sw + x0] * (1.0 - fx) + src[y0 * sw + x1] * fx;
            let bot = src[y1 * sw + x0] * (1.0 - fx) + src[y1 * sw + x1] * fx;
            out.push(top * (1.0 - fy) + bot * fy);
        }
    }
    out
}

fn check_task(task: usize) -> Result<()> {
    if task >= N_TASKS {
        return Err(Error::Invalid(format!("task {task} out of range 0..{N_TASKS}")));
    }
    dims::active(task)?;
    Ok(())
}

/// Eval-mode forward of one sample and the gradient of one task logit.
fn task_gradients<F: Scalar>(
    net: &Network<F>,
    sample: &AlignedSample,
    task: usize,
    policy: ModalityPolicy,
    stats: Option<&ModalityStats>,
    keep: &KeepMaps,
) -> Result<(EvalMaps<F>, FeatureGrads<F>)> {
    check_task(task)?;
    let input = BatchInput::<F>::from_samples(&[sample], &net.config, policy, stats)?;
    let (feats, maps) = net.features_eval(&input, Graph::Full, keep)?;
    let (_, cache) = net.top_forward(&feats, 1, Graph::Full)?;
    let mut dlogits = vec![F::zero(); N_TASKS];
    dlogits[task] = F::one();
    let mut scratch = net.zeros_like();
    Ok((maps, net.top_backward(&cache, &dlogits, &mut scratch)))
}

fn cam<F: Scalar>(maps: &TaskMaps<F>, dpool: &[F], task: usize, steps: usize) -> SpatialMaps {
    let (h, w, c) = (maps.height, maps.width, maps.channels);
    let hw = h * w;
    let per_image = N_TASKS * c * hw;
    let mut data = Vec::with_capacity(steps * OUT_HEIGHT * OUT_WIDTH);
    for t in 0..steps {
        let mut low = vec![0.0f64; hw];
        for ch in 0..c {
            // the pooled gradient is uniform over the plane, so its spatial mean is dpool / hw
            let wc = dpool[(t * N_TASKS + task) * c + ch].f64() / hw as f64;
            let a = &maps.data[t * per_image + (task * c + ch) * hw..][..hw];
            low.iter_mut().zip(a).for_each(|(l, &v)| *l += wc * v.f64());
        }
        low.iter_mut().for_each(|v| *v = v.max(0.0));
        let up = bilinear_upsample(&low, h, w, OUT_HEIGHT, OUT_WIDTH);
        let peak = up.iter().cloned().fold(0.0, f64::max);
        if peak > 0.0 {
            data.extend(up.iter().map(|&v| (v / peak) as f32));
        } else {
            data.extend(std::iter::repeat_n(0.0f32, up.len()));
        }
    }
    SpatialMaps { steps, data }
}

/// Grad-CAM of `task`'s pre-sigmoid logit over `layer`'s activations.
pub fn grad_cam<F: Scalar>(
    net: &Network<F>,
    sample: &AlignedSample,
    task: usize,
    layer: CamLayer,
    policy: ModalityPolicy,
    stats: Option<&ModalityStats>,
) -> Result<SpatialMaps> {
    let keep = KeepMaps { temporal: layer == CamLayer::TemporalVideoTask, spatial: layer == CamLayer::SpatialVideoTask };
    let (maps, grads) = task_gradients(net, sample, task, policy, stats, &keep)?;
    let (maps, dpool) = match layer {
        CamLayer::TemporalVideoTask => (maps.temporal, grads.tv),
        CamLayer::SpatialVideoTask => (maps.spatial, grads.sv),
    };
    let maps = maps.ok_or_else(|| Error::Invalid(format!("no activations kept for {}", layer.name())))?;
    Ok(cam(&maps, &dpool, task, net.config.steps))
}

/// Row `task` of a `[t][task][dim]` gradient, as per-timestep L2 norms
/// normalized to sum 1. A zero gradient gives uniform weights.
fn step_weights<F: Scalar>(g: &[F], steps: usize, task: usize) -> Vec<f64> {
    let per_step = g.len() / steps;
    let dim = per_step / N_TASKS;
    let norms: Vec<f64> =
        (0..steps).map(|t| g[t * per_step + task * dim..][..dim].iter().map(|v| v.f64() * v.f64()).sum::<f64>().sqrt()).collect();
    let total: f64 = norms.iter().sum();
    if total > 0.0 && total.is_finite() {
        norms.iter().map(|n| n / total).collect()
    } else {
        vec![1.0 / steps as f64; steps]
    }
}

fn weights_from<F: Scalar>(grads: &FeatureGrads<F>, steps: usize, task: usize) -> TemporalWeights {
    let temporal_branch = step_weights(&grads.temporal_inputs, steps, task);
    let spatial_branch = step_weights(&grads.spatial_inputs, steps, task);
    let combined = temporal_branch.iter().zip(&spatial_branch).map(|(a, b)| 0.5 * (a + b)).collect();
    TemporalWeights { temporal_branch, spatial_branch, combined }
}

/// Per-timestep weight of `task`'s logit on each branch's recurrent input.
pub fn temporal_saliency<F: Scalar>(
    net: &Network<F>,
    sample: &AlignedSample,
    task: usize,
    policy: ModalityPolicy,
    stats: Option<&ModalityStats>,
) -> Result<TemporalWeights> {
    let (_, grads) = task_gradients(net, sample, task, policy, stats, &KeepMaps::default())?;
    Ok(weights_from(&grads, net.config.steps, task))
}

/// Both explanations from one forward and backward pass.
pub fn explain<F: Scalar>(
    net: &Network<F>,
    sample: &AlignedSample,
    task: usize,
    layer: CamLayer,
    policy: ModalityPolicy,
    stats: Option<&ModalityStats>,
) -> Result<SaliencyResult> {
    let keep = KeepMaps { temporal: layer == CamLayer::TemporalVideoTask, spatial: layer == CamLayer::SpatialVideoTask };
    let (maps, grads) = task_gradients(net, sample, task, policy, stats, &keep)?;
    let steps = net.config.steps;
    let temporal = weights_from(&grads, steps, task);
    let (maps, dpool) = match layer {
        CamLayer::TemporalVideoTask => (maps.temporal, &grads.tv),
        CamLayer::SpatialVideoTask => (maps.spatial, &grads.sv),
    };
    let maps = maps.ok_or_else(|| Error::Invalid(format!("no activations kept for {}", layer.name())))?;
    Ok(SaliencyResult {
        participant_id: sample.participant_id.clone(),
        video_id: sample.video_id.clone(),
        task_id: task,
        layer,
        spatial: cam(&maps, dpool, task, steps),
        temporal,
    })
}

pub fn write_saliency(dir: &Path, r: &SaliencyResult) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let t = r.spatial.steps;
    write_array(dir.join("spatial.arr"), &Array::f32(vec![t, OUT_HEIGHT, OUT_WIDTH], r.spatial.data.clone())?)?;
    let rows: Vec<f32> = [&r.temporal.temporal_branch, &r.temporal.spatial_branch, &r.temporal.combined]
        .into_iter()
        .flat_map(|w| w.iter().map(|&v| v as f32))
        .collect();
    write_array(dir.join("temporal.arr"), &Array::f32(vec![3, t], rows)?)?;
    let meta = Meta {
        participant_id: r.participant_id.clone(),
        video_id: r.video_id.clone(),
        task_id: r.task_id,
        task_name: dims::active(r.task_id)?.name.to_string(),
        layer: r.layer,
        steps: t,
    };
    std::fs::write(dir.join("meta.toml"), toml::to_string(&meta).expect("metadata serializes"))?;
    Ok(())
}

/// Read back what [`write_saliency`] wrote. Temporal weights come back at
/// `f32` precision.
pub fn read_saliency(dir: &Path) -> Result<SaliencyResult> {
    let path = dir.join("meta.toml");
    let text = std::fs::read_to_string(&path)?;
    let meta: Meta = toml::from_str(&text).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
    let (shape, spatial) = read_array(dir.join("spatial.arr"))?.into_f32(Some(3))?;
    if shape != [meta.steps, OUT_HEIGHT, OUT_WIDTH] {
        return Err(Error::Invalid(format!("spatial maps have shape {shape:?}")));
    }
    let (shape, rows) = read_array(dir.join("temporal.arr"))?.into_f32(Some(2))?;
    if shape != [3, meta.steps] {
        return Err(Error::Invalid(format!("temporal weights have shape {shape:?}")));
    }
    let row = |i: usize| rows[i * meta.steps..(i + 1) * meta.steps].iter().map(|&v| v as f64).collect();
    Ok(SaliencyResult {
        participant_id: meta.participant_id,
        video_id: meta.video_id,
        task_id: meta.task_id,
        layer: meta.layer,
        spatial: SpatialMaps { steps: meta.steps, data: spatial },
        temporal: TemporalWeights { temporal_branch: row(0), spatial_branch: row(1), combined: row(2) },
    })
}
