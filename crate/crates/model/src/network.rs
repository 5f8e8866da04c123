//! The dual-branch network.
//!
//! Temporal branch: video backbone -> per-task conv, pupil encoder -> per-task
//! conv, pooled and concatenated per timestep, shared LSTM. Spatial branch:
//! video backbone -> per-task conv and attention backbone, recalibrated by
//! the multimodal transfer module, pooled, shared LSTM, per-task LSTM. Each
//! task's head reads both branches' final hidden states.
//!
//! The fifteen task convolutions of a stream run as one stacked convolution.
//! The transfer gates are per channel, so pooling commutes with the residual
//! recalibration: `GAP(X + X*E) = GAP(X) * (1 + E)`. Recalibrated maps are
//! therefore never materialized.
//!
//! LSTM batches stack tasks: row `k * B + b` carries task `k` of sample `b`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::error::{Error, Result};
use crate::input::BatchInput;
use crate::layers::{
    global_avg_pool, sigmoid, Backbone, BackboneCache, Conv2d, Head, HeadCache, Lstm, LstmCache, Mmtm, MmtmCache, Param,
};
use crate::params::{backbone_buffers, backbone_buffers_mut, Visit};
use crate::scalar::Scalar;

/// Which part of the network produces the logits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Graph {
    /// Temporal branch with the temporary stage-one heads.
    Temporal,
    /// Both branches with the final heads.
    Full,
}

pub const GROUP_PREFIXES: [&str; 13] = [
    "temporal.video_backbone",
    "temporal.video_taskconv",
    "temporal.pupil_encoder",
    "temporal.pupil_taskconv",
    "temporal.shared_lstm",
    "spatial.video_backbone",
    "spatial.video_taskconv",
    "spatial.attn_backbone",
    "spatial.mmtm",
    "spatial.shared_lstm",
    "spatial.task_lstm",
    "head",
    "stage1_head",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Network<F> {
    pub config: ModelConfig,
    pub t_video: Backbone<F>,
    pub t_video_task: Vec<Conv2d<F>>,
    pub t_pupil: Backbone<F>,
    pub t_pupil_task: Vec<Conv2d<F>>,
    pub t_lstm: Lstm<F>,
    pub s_video: Backbone<F>,
    pub s_video_task: Vec<Conv2d<F>>,
    pub s_attn: Backbone<F>,
    pub mmtm: Mmtm<F>,
    pub s_lstm: Lstm<F>,
    pub s_task_lstm: Vec<Lstm<F>>,
    pub heads: Vec<Head<F>>,
    /// Temporary heads for temporal pretraining; empty once discarded.
    pub stage1_heads: Vec<Head<F>>,
}

/// One named learnable tensor.
pub struct ParamRef<'a, F> {
    pub group: String,
    pub name: String,
    pub param: &'a Param<F>,
}

pub struct ParamMut<'a, F> {
    pub group: String,
    pub name: String,
    pub param: &'a mut Param<F>,
}

/// Pooled per-timestep features of every stream, image index `n = b*T + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Features<F> {
    pub images: usize,
    /// `[n][task][Cv]`
    pub tv: Vec<F>,
    /// `[n][task][Cp]`
    pub tp: Vec<F>,
    /// `[n][task][Cv]`, empty for the temporal graph
    pub sv: Vec<F>,
    /// `[n][Cm]`, empty for the temporal graph
    pub sm: Vec<F>,
}

/// Post-ReLU task-conv activations `[n][task*Cv][h][w]` kept for Grad-CAM.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskMaps<F> {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<F>,
}

#[derive(Debug, Clone, Default)]
pub struct KeepMaps {
    pub temporal: bool,
    pub spatial: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalMaps<F> {
    pub temporal: Option<TaskMaps<F>>,
    pub spatial: Option<TaskMaps<F>>,
}

/// Training-mode caches of the convolutional part.
pub struct FeatureCache<F> {
    t_video: BackboneCache<F>,
    t_video_maps: Vec<F>,
    t_pupil: BackboneCache<F>,
    t_pupil_maps: Vec<F>,
    s_video: Option<(BackboneCache<F>, Vec<F>)>,
    s_attn: Option<BackboneCache<F>>,
}

/// Caches of the recurrent part and the heads.
pub struct TopCache<F> {
    graph: Graph,
    batch: usize,
    steps: usize,
    t_lstm: Vec<LstmCache<F>>,
    heads: Vec<HeadCache<F>>,
    spatial: Option<SpatialCache<F>>,
}

struct SpatialCache<F> {
    s_a: Vec<F>,
    s_b: Vec<F>,
    e_a: Vec<F>,
    e_b: Vec<F>,
    mmtm: MmtmCache<F>,
    s_lstm: Vec<LstmCache<F>>,
    task: Vec<Vec<LstmCache<F>>>,
}

/// Gradients of the loss with respect to pooled features and LSTM inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrads<F> {
    pub tv: Vec<F>,
    pub tp: Vec<F>,
    pub sv: Vec<F>,
    pub sm: Vec<F>,
    /// `[t][task*B + b][Cv+Cp]`
    pub temporal_inputs: Vec<F>,
    /// `[t][task*B + b][Cv+Cm]`, empty for the temporal graph
    pub spatial_inputs: Vec<F>,
}

fn conv_bank<F: Scalar>(cin: usize, cout: usize, tasks: usize, rng: &mut ChaCha8Rng) -> Vec<Conv2d<F>> {
    (0..tasks).map(|_| Conv2d::new(cin, cout, true, rng)).collect()
}

/// The task convolutions stacked along the output-channel axis.
fn stack_convs<F: Scalar>(convs: &[Conv2d<F>]) -> Conv2d<F> {
    let cin = convs[0].cin;
    let cout: usize = convs.iter().map(|c| c.cout).sum();
    let mut weight = Vec::with_capacity(cout * cin * 9);
    let mut bias = Vec::with_capacity(cout);
    for c in convs {
        weight.extend_from_slice(&c.weight.data);
        bias.extend_from_slice(&c.bias.as_ref().expect("task convs have biases").data);
    }
    Conv2d {
        cin,
        cout,
        weight: Param { shape: vec![cout, cin * 9], data: weight },
        bias: Some(Param { shape: vec![cout], data: bias }),
    }
}

fn unstack_add<F: Scalar>(stacked: &Conv2d<F>, grads: &mut [Conv2d<F>]) {
    let (mut wo, mut bo) = (0, 0);
    for g in grads {
        let wl = g.weight.len();
        g.weight.data.iter_mut().zip(&stacked.weight.data[wo..wo + wl]).for_each(|(a, &b)| *a += b);
        wo += wl;
        let gb = g.bias.as_mut().expect("task convs have biases");
        let bl = gb.len();
        gb.data.iter_mut().zip(&stacked.bias.as_ref().unwrap().data[bo..bo + bl]).for_each(|(a, &b)| *a += b);
        bo += bl;
    }
}

/// Stacked task convs followed by ReLU: `[n][tasks*C][h][w]`.
fn bank_forward<F: Scalar>(convs: &[Conv2d<F>], x: &[F], n: usize, h: usize, w: usize) -> Vec<F> {
    let stacked = stack_convs(convs);
    let mut y = vec![F::zero(); n * stacked.cout * h * w];
    stacked.forward(x, n, h, w, &mut y);
    y.iter_mut().for_each(|v| *v = v.max(F::zero()));
    y
}

/// `dpool`: gradient w.r.t. the pooled bank output `[n][tasks*C]`.
#[allow(clippy::too_many_arguments)]
fn bank_backward<F: Scalar>(
    convs: &[Conv2d<F>],
    x: &[F],
    n: usize,
    h: usize,
    w: usize,
    maps: &[F],
    dpool: &[F],
    grads: &mut [Conv2d<F>],
) -> Vec<F> {
    let stacked = stack_convs(convs);
    let hw = h * w;
    let inv = F::one() / F::from_f64(hw as f64);
    let mut dy = vec![F::zero(); maps.len()];
    for (j, (d, m)) in dy.chunks_mut(hw).zip(maps.chunks(hw)).enumerate() {
        let g = dpool[j] * inv;
        if g == F::zero() {
            continue;
        }
        for (dv, &mv) in d.iter_mut().zip(m) {
            if mv > F::zero() {
                *dv = g;
            }
        }
    }
    let mut sgrad = stacked.zeros_like();
    let mut dx = vec![F::zero(); n * stacked.cin * hw];
    stacked.backward(x, n, h, w, &dy, &mut sgrad, Some(&mut dx));
    unstack_add(&sgrad, grads);
    dx
}

/// Gradient of a global average pool broadcast back over the plane.
fn unpool<F: Scalar>(dpool: &[F], hw: usize) -> Vec<F> {
    let inv = F::one() / F::from_f64(hw as f64);
    dpool.iter().flat_map(|&g| std::iter::repeat_n(g * inv, hw)).collect()
}

impl<F: Scalar> Network<F> {
    /// Deterministic initialization from `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let c = &config;
        let k = c.n_tasks;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let last = |v: &Vec<usize>| *v.last().unwrap();
        let t_video = Backbone::new(3, &c.video_channels, &mut rng);
        let t_video_task = conv_bank(last(&c.video_channels), c.video_task_channels, k, &mut rng);
        let t_pupil = Backbone::new(2, &c.pupil_channels, &mut rng);
        let t_pupil_task = conv_bank(last(&c.pupil_channels), c.pupil_task_channels, k, &mut rng);
        let t_lstm = Lstm::new(c.temporal_input(), c.hidden, c.shared_lstm_layers, &mut rng);
        let s_video = Backbone::new(3, &c.video_channels, &mut rng);
        let s_video_task = conv_bank(last(&c.video_channels), c.video_task_channels, k, &mut rng);
        let s_attn = Backbone::new(1, &c.attention_channels, &mut rng);
        let mmtm = Mmtm::new(c.video_task_channels, last(&c.attention_channels), &mut rng);
        let s_lstm = Lstm::new(c.spatial_input(), c.hidden, c.shared_lstm_layers, &mut rng);
        let s_task_lstm = (0..k).map(|_| Lstm::new(c.hidden, c.hidden, c.task_lstm_layers, &mut rng)).collect();
        let heads = (0..k).map(|_| Head::new(2 * c.hidden, c.head_hidden, &mut rng)).collect();
        let stage1_heads = (0..k).map(|_| Head::new(c.hidden, c.head_hidden, &mut rng)).collect();
        Ok(Network {
            config,
            t_video,
            t_video_task,
            t_pupil,
            t_pupil_task,
            t_lstm,
            s_video,
            s_video_task,
            s_attn,
            mmtm,
            s_lstm,
            s_task_lstm,
            heads,
            stage1_heads,
        })
    }

    /// Same structure with every parameter zero; used as a gradient buffer.
    pub fn zeros_like(&self) -> Self {
        Network {
            config: self.config.clone(),
            t_video: self.t_video.zeros_like(),
            t_video_task: self.t_video_task.iter().map(Conv2d::zeros_like).collect(),
            t_pupil: self.t_pupil.zeros_like(),
            t_pupil_task: self.t_pupil_task.iter().map(Conv2d::zeros_like).collect(),
            t_lstm: self.t_lstm.zeros_like(),
            s_video: self.s_video.zeros_like(),
            s_video_task: self.s_video_task.iter().map(Conv2d::zeros_like).collect(),
            s_attn: self.s_attn.zeros_like(),
            mmtm: self.mmtm.zeros_like(),
            s_lstm: self.s_lstm.zeros_like(),
            s_task_lstm: self.s_task_lstm.iter().map(Lstm::zeros_like).collect(),
            heads: self.heads.iter().map(Head::zeros_like).collect(),
            stage1_heads: self.stage1_heads.iter().map(Head::zeros_like).collect(),
        }
    }

    fn visit_all<'a>(&'a self, f: &mut dyn FnMut(&str, String, &'a Param<F>)) {
        macro_rules! group {
            ($g:expr, $x:expr) => {{
                let g: String = $g;
                $x.visit(&g, &mut |n, p| f(&g, n, p));
            }};
        }
        group!("temporal.video_backbone".into(), self.t_video);
        for (i, c) in self.t_video_task.iter().enumerate() {
            group!(format!("temporal.video_taskconv.{i}"), c);
        }
        group!("temporal.pupil_encoder".into(), self.t_pupil);
        for (i, c) in self.t_pupil_task.iter().enumerate() {
            group!(format!("temporal.pupil_taskconv.{i}"), c);
        }
        group!("temporal.shared_lstm".into(), self.t_lstm);
        group!("spatial.video_backbone".into(), self.s_video);
        for (i, c) in self.s_video_task.iter().enumerate() {
            group!(format!("spatial.video_taskconv.{i}"), c);
        }
        group!("spatial.attn_backbone".into(), self.s_attn);
        group!("spatial.mmtm".into(), self.mmtm);
        group!("spatial.shared_lstm".into(), self.s_lstm);
        for (i, l) in self.s_task_lstm.iter().enumerate() {
            group!(format!("spatial.task_lstm.{i}"), l);
        }
        for (i, h) in self.heads.iter().enumerate() {
            group!(format!("head.{i}"), h);
        }
        for (i, h) in self.stage1_heads.iter().enumerate() {
            group!(format!("stage1_head.{i}"), h);
        }
    }

    fn visit_all_mut<'a>(&'a mut self, f: &mut dyn FnMut(&str, String, &'a mut Param<F>)) {
        macro_rules! group {
            ($g:expr, $x:expr) => {{
                let g: String = $g;
                $x.visit_mut(&g, &mut |n, p| f(&g, n, p));
            }};
        }
        let Network {
            t_video,
            t_video_task,
            t_pupil,
            t_pupil_task,
            t_lstm,
            s_video,
            s_video_task,
            s_attn,
            mmtm,
            s_lstm,
            s_task_lstm,
            heads,
            stage1_heads,
            ..
        } = self;
        group!("temporal.video_backbone".into(), t_video);
        for (i, c) in t_video_task.iter_mut().enumerate() {
            group!(format!("temporal.video_taskconv.{i}"), c);
        }
        group!("temporal.pupil_encoder".into(), t_pupil);
        for (i, c) in t_pupil_task.iter_mut().enumerate() {
            group!(format!("temporal.pupil_taskconv.{i}"), c);
        }
        group!("temporal.shared_lstm".into(), t_lstm);
        group!("spatial.video_backbone".into(), s_video);
        for (i, c) in s_video_task.iter_mut().enumerate() {
            group!(format!("spatial.video_taskconv.{i}"), c);
        }
        group!("spatial.attn_backbone".into(), s_attn);
        group!("spatial.mmtm".into(), mmtm);
        group!("spatial.shared_lstm".into(), s_lstm);
        for (i, l) in s_task_lstm.iter_mut().enumerate() {
            group!(format!("spatial.task_lstm.{i}"), l);
        }
        for (i, h) in heads.iter_mut().enumerate() {
            group!(format!("head.{i}"), h);
        }
        for (i, h) in stage1_heads.iter_mut().enumerate() {
            group!(format!("stage1_head.{i}"), h);
        }
    }

    /// Every learnable tensor in a fixed order.
    pub fn params(&self) -> Vec<ParamRef<'_, F>> {
        let mut out = Vec::new();
        self.visit_all(&mut |g, name, param| out.push(ParamRef { group: g.to_string(), name, param }));
        out
    }

    pub fn params_mut(&mut self) -> Vec<ParamMut<'_, F>> {
        let mut out = Vec::new();
        self.visit_all_mut(&mut |g, name, param| out.push(ParamMut { group: g.to_string(), name, param }));
        out
    }

    /// Distinct group names in parameter order.
    pub fn groups(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for p in self.params() {
            if out.last() != Some(&p.group) {
                out.push(p.group);
            }
        }
        out
    }

    /// Tensors of one group, e.g. `spatial.task_lstm.3`.
    pub fn group(&self, name: &str) -> Result<Vec<ParamRef<'_, F>>> {
        let v: Vec<_> = self.params().into_iter().filter(|p| p.group == name).collect();
        if v.is_empty() {
            return Err(Error::UnknownGroup(name.to_string()));
        }
        Ok(v)
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.param.len()).sum()
    }

    /// Batch-norm running statistics.
    pub fn buffers(&self) -> Vec<(String, &Vec<F>)> {
        let mut out = Vec::new();
        backbone_buffers(&self.t_video, "temporal.video_backbone", &mut out);
        backbone_buffers(&self.t_pupil, "temporal.pupil_encoder", &mut out);
        backbone_buffers(&self.s_video, "spatial.video_backbone", &mut out);
        backbone_buffers(&self.s_attn, "spatial.attn_backbone", &mut out);
        out
    }

    pub fn buffers_mut(&mut self) -> Vec<(String, &mut Vec<F>)> {
        let mut out = Vec::new();
        backbone_buffers_mut(&mut self.t_video, "temporal.video_backbone", &mut out);
        backbone_buffers_mut(&mut self.t_pupil, "temporal.pupil_encoder", &mut out);
        backbone_buffers_mut(&mut self.s_video, "spatial.video_backbone", &mut out);
        backbone_buffers_mut(&mut self.s_attn, "spatial.attn_backbone", &mut out);
        out
    }

    /// Drop the temporary stage-one heads.
    pub fn discard_stage1_heads(&mut self) {
        self.stage1_heads.clear();
    }

    fn check_input(&self, input: &BatchInput<F>, graph: Graph) -> Result<()> {
        let c = &self.config;
        let n = input.images();
        if input.steps != c.steps {
            return Err(Error::Shape(format!("input has {} steps, model expects {}", input.steps, c.steps)));
        }
        if input.labels.len() != input.batch {
            return Err(Error::Shape("one label row per sample required".into()));
        }
        let want = [
            ("frames", input.frames.len(), n * 3 * c.frame_height * c.frame_width),
            ("pupil", input.pupil.len(), n * 2 * c.pupil_size * c.pupil_size),
            ("attention", input.attention.len(), n * c.map_height * c.map_width),
        ];
        for (name, got, exp) in want {
            if got != exp {
                return Err(Error::Shape(format!("{name} holds {got} values, expected {exp}")));
            }
        }
        if graph == Graph::Temporal && self.stage1_heads.len() != c.n_tasks {
            return Err(Error::Mode("temporary heads have been discarded".into()));
        }
        Ok(())
    }

    fn video_dims(&self) -> (usize, usize) {
        self.t_video.out_dims(self.config.frame_height, self.config.frame_width)
    }

    // -----------------------------------------------------------------------
    // convolutional part

    /// Training-mode features (batch statistics; running statistics updated).
    pub fn features_train(&mut self, input: &BatchInput<F>, graph: Graph) -> Result<(Features<F>, FeatureCache<F>)> {
        self.check_input(input, graph)?;
        let c = self.config.clone();
        let n = input.images();
        let tv_c = self.t_video.forward_train(&input.frames, n, c.frame_height, c.frame_width);
        let (vh, vw) = (tv_c.out_h, tv_c.out_w);
        let t_video_maps = bank_forward(&self.t_video_task, tv_c.output(), n, vh, vw);
        let tv = global_avg_pool(&t_video_maps, n, c.n_tasks * c.video_task_channels, vh * vw);
        let tp_c = self.t_pupil.forward_train(&input.pupil, n, c.pupil_size, c.pupil_size);
        let (ph, pw) = (tp_c.out_h, tp_c.out_w);
        let t_pupil_maps = bank_forward(&self.t_pupil_task, tp_c.output(), n, ph, pw);
        let tp = global_avg_pool(&t_pupil_maps, n, c.n_tasks * c.pupil_task_channels, ph * pw);
        let mut feats = Features { images: n, tv, tp, sv: Vec::new(), sm: Vec::new() };
        let mut cache = FeatureCache { t_video: tv_c, t_video_maps, t_pupil: tp_c, t_pupil_maps, s_video: None, s_attn: None };
        if graph == Graph::Full {
            let sv_c = self.s_video.forward_train(&input.frames, n, c.frame_height, c.frame_width);
            let maps = bank_forward(&self.s_video_task, sv_c.output(), n, vh, vw);
            feats.sv = global_avg_pool(&maps, n, c.n_tasks * c.video_task_channels, vh * vw);
            let sa_c = self.s_attn.forward_train(&input.attention, n, c.map_height, c.map_width);
            let cm = self.s_attn.out_channels();
            feats.sm = global_avg_pool(sa_c.output(), n, cm, sa_c.out_h * sa_c.out_w);
            cache.s_video = Some((sv_c, maps));
            cache.s_attn = Some(sa_c);
        }
        Ok((feats, cache))
    }

    /// Inference-mode features, one sample at a time.
    pub fn features_eval(&self, input: &BatchInput<F>, graph: Graph, keep: &KeepMaps) -> Result<(Features<F>, EvalMaps<F>)> {
        self.check_input(input, graph)?;
        let c = &self.config;
        let t = input.steps;
        let (vh, vw) = self.video_dims();
        let mut feats = Features { images: input.images(), tv: Vec::new(), tp: Vec::new(), sv: Vec::new(), sm: Vec::new() };
        let mut kept = EvalMaps { temporal: None, spatial: None };
        let task_maps = |data: Vec<F>| TaskMaps { height: vh, width: vw, channels: c.video_task_channels, data };
        let (fl, pl, ml) = (3 * c.frame_height * c.frame_width, 2 * c.pupil_size * c.pupil_size, c.map_height * c.map_width);
        for b in 0..input.batch {
            let frames = &input.frames[b * t * fl..(b + 1) * t * fl];
            let v = self.t_video.forward_eval(frames, t, c.frame_height, c.frame_width);
            let maps = bank_forward(&self.t_video_task, &v, t, vh, vw);
            feats.tv.extend(global_avg_pool(&maps, t, c.n_tasks * c.video_task_channels, vh * vw));
            if keep.temporal {
                kept.temporal.get_or_insert_with(|| task_maps(Vec::new())).data.extend(maps);
            }
            let pupil = &input.pupil[b * t * pl..(b + 1) * t * pl];
            let p = self.t_pupil.forward_eval(pupil, t, c.pupil_size, c.pupil_size);
            let (ph, pw) = self.t_pupil.out_dims(c.pupil_size, c.pupil_size);
            let maps = bank_forward(&self.t_pupil_task, &p, t, ph, pw);
            feats.tp.extend(global_avg_pool(&maps, t, c.n_tasks * c.pupil_task_channels, ph * pw));
            if graph == Graph::Full {
                let v = self.s_video.forward_eval(frames, t, c.frame_height, c.frame_width);
                let maps = bank_forward(&self.s_video_task, &v, t, vh, vw);
                feats.sv.extend(global_avg_pool(&maps, t, c.n_tasks * c.video_task_channels, vh * vw));
                if keep.spatial {
                    kept.spatial.get_or_insert_with(|| task_maps(Vec::new())).data.extend(maps);
                }
                let attn = &input.attention[b * t * ml..(b + 1) * t * ml];
                let m = self.s_attn.forward_eval(attn, t, c.map_height, c.map_width);
                let (ah, aw) = self.s_attn.out_dims(c.map_height, c.map_width);
                feats.sm.extend(global_avg_pool(&m, t, self.s_attn.out_channels(), ah * aw));
            }
        }
        Ok((feats, kept))
    }

    /// Backpropagate pooled-feature gradients through the convolutional part.
    pub fn features_backward(
        &self,
        input: &BatchInput<F>,
        cache: &FeatureCache<F>,
        fg: &FeatureGrads<F>,
        grads: &mut Network<F>,
    ) {
        let n = input.images();
        let (vh, vw) = (cache.t_video.out_h, cache.t_video.out_w);
        let dv = bank_backward(
            &self.t_video_task,
            cache.t_video.output(),
            n,
            vh,
            vw,
            &cache.t_video_maps,
            &fg.tv,
            &mut grads.t_video_task,
        );
        self.t_video.backward(&input.frames, &cache.t_video, dv, &mut grads.t_video);
        let (ph, pw) = (cache.t_pupil.out_h, cache.t_pupil.out_w);
        let dp = bank_backward(
            &self.t_pupil_task,
            cache.t_pupil.output(),
            n,
            ph,
            pw,
            &cache.t_pupil_maps,
            &fg.tp,
            &mut grads.t_pupil_task,
        );
        self.t_pupil.backward(&input.pupil, &cache.t_pupil, dp, &mut grads.t_pupil);
        if let (Some((sv_c, maps)), Some(sa_c)) = (&cache.s_video, &cache.s_attn) {
            let dv = bank_backward(&self.s_video_task, sv_c.output(), n, vh, vw, maps, &fg.sv, &mut grads.s_video_task);
            self.s_video.backward(&input.frames, sv_c, dv, &mut grads.s_video);
            let dm = unpool(&fg.sm, sa_c.out_h * sa_c.out_w);
            self.s_attn.backward(&input.attention, sa_c, dm, &mut grads.s_attn);
        }
    }

    // -----------------------------------------------------------------------
    // recurrent part and heads

    /// Logits `[b][task]` from pooled features.
    pub fn top_forward(&self, feats: &Features<F>, batch: usize, graph: Graph) -> Result<(Vec<F>, TopCache<F>)> {
        let c = &self.config;
        let (k, t, hd) = (c.n_tasks, c.steps, c.hidden);
        if feats.images != batch * t {
            return Err(Error::Shape(format!("features cover {} images, expected {}", feats.images, batch * t)));
        }
        if graph == Graph::Full && (feats.sv.is_empty() || feats.sm.is_empty()) {
            return Err(Error::Shape("full graph needs spatial features".into()));
        }
        let rows = k * batch;
        let (cv, cp) = (c.video_task_channels, c.pupil_task_channels);
        let ti = cv + cp;
        let mut x = vec![F::zero(); t * rows * ti];
        for step in 0..t {
            for task in 0..k {
                for b in 0..batch {
                    let n = b * t + step;
                    let dst = &mut x[(step * rows + task * batch + b) * ti..][..ti];
                    dst[..cv].copy_from_slice(&feats.tv[(n * k + task) * cv..][..cv]);
                    dst[cv..].copy_from_slice(&feats.tp[(n * k + task) * cp..][..cp]);
                }
            }
        }
        let (th, t_lstm) = self.t_lstm.forward(&x, t, rows);
        let t_final = &th[(t - 1) * rows * hd..];
        let mut logits = vec![F::zero(); batch * k];
        let mut heads = Vec::with_capacity(k);
        let mut spatial = None;
        match graph {
            Graph::Temporal => {
                for task in 0..k {
                    let (z, hc) = self.stage1_heads[task].forward(&t_final[task * batch * hd..][..batch * hd], batch);
                    for b in 0..batch {
                        logits[b * k + task] = z[b];
                    }
                    heads.push(hc);
                }
            }
            Graph::Full => {
                let cm = self.s_attn.out_channels();
                let si = cv + cm;
                let mut s_a = vec![F::zero(); t * rows * cv];
                let mut s_b = vec![F::zero(); t * rows * cm];
                for step in 0..t {
                    for task in 0..k {
                        for b in 0..batch {
                            let n = b * t + step;
                            let r = step * rows + task * batch + b;
                            s_a[r * cv..(r + 1) * cv].copy_from_slice(&feats.sv[(n * k + task) * cv..][..cv]);
                            s_b[r * cm..(r + 1) * cm].copy_from_slice(&feats.sm[n * cm..(n + 1) * cm]);
                        }
                    }
                }
                let (e_a, e_b, mmtm) = self.mmtm.gates(&s_a, &s_b, t * rows);
                let mut p = vec![F::zero(); t * rows * si];
                for r in 0..t * rows {
                    let dst = &mut p[r * si..(r + 1) * si];
                    for j in 0..cv {
                        dst[j] = s_a[r * cv + j] * (F::one() + e_a[r * cv + j]);
                    }
                    for j in 0..cm {
                        dst[cv + j] = s_b[r * cm + j] * (F::one() + e_b[r * cm + j]);
                    }
                }
                let (sh, s_lstm) = self.s_lstm.forward(&p, t, rows);
                let mut task_caches = Vec::with_capacity(k);
                for task in 0..k {
                    let mut xs = vec![F::zero(); t * batch * hd];
                    for step in 0..t {
                        xs[step * batch * hd..(step + 1) * batch * hd]
                            .copy_from_slice(&sh[(step * rows + task * batch) * hd..][..batch * hd]);
                    }
                    let (h, tc) = self.s_task_lstm[task].forward(&xs, t, batch);
                    task_caches.push(tc);
                    let s_final = &h[(t - 1) * batch * hd..];
                    let mut hin = vec![F::zero(); batch * 2 * hd];
                    for b in 0..batch {
                        hin[b * 2 * hd..b * 2 * hd + hd].copy_from_slice(&t_final[(task * batch + b) * hd..][..hd]);
                        hin[b * 2 * hd + hd..(b + 1) * 2 * hd].copy_from_slice(&s_final[b * hd..(b + 1) * hd]);
                    }
                    let (z, hc) = self.heads[task].forward(&hin, batch);
                    for b in 0..batch {
                        logits[b * k + task] = z[b];
                    }
                    heads.push(hc);
                }
                spatial = Some(SpatialCache { s_a, s_b, e_a, e_b, mmtm, s_lstm, task: task_caches });
            }
        }
        Ok((logits, TopCache { graph, batch, steps: t, t_lstm, heads, spatial }))
    }

    /// Backpropagate logit gradients `[b][task]` to pooled features.
    pub fn top_backward(&self, cache: &TopCache<F>, dlogits: &[F], grads: &mut Network<F>) -> FeatureGrads<F> {
        let c = &self.config;
        let (k, t, hd, batch) = (c.n_tasks, cache.steps, c.hidden, cache.batch);
        let rows = k * batch;
        let (cv, cp) = (c.video_task_channels, c.pupil_task_channels);
        let n = batch * t;
        let mut dth = vec![F::zero(); t * rows * hd];
        let last = (t - 1) * rows * hd;
        let mut out = FeatureGrads {
            tv: vec![F::zero(); n * k * cv],
            tp: vec![F::zero(); n * k * cp],
            sv: Vec::new(),
            sm: Vec::new(),
            temporal_inputs: Vec::new(),
            spatial_inputs: Vec::new(),
        };
        match cache.graph {
            Graph::Temporal => {
                for task in 0..k {
                    let dz: Vec<F> = (0..batch).map(|b| dlogits[b * k + task]).collect();
                    let dx = self.stage1_heads[task].backward(&cache.heads[task], &dz, &mut grads.stage1_heads[task]);
                    dth[last + task * batch * hd..][..batch * hd].copy_from_slice(&dx);
                }
            }
            Graph::Full => {
                let sc = cache.spatial.as_ref().expect("full graph cache");
                let cm = self.s_attn.out_channels();
                let si = cv + cm;
                let mut dsh = vec![F::zero(); t * rows * hd];
                for task in 0..k {
                    let dz: Vec<F> = (0..batch).map(|b| dlogits[b * k + task]).collect();
                    let dx = self.heads[task].backward(&cache.heads[task], &dz, &mut grads.heads[task]);
                    let mut dh_task = vec![F::zero(); t * batch * hd];
                    for b in 0..batch {
                        dth[last + (task * batch + b) * hd..][..hd].copy_from_slice(&dx[b * 2 * hd..b * 2 * hd + hd]);
                        dh_task[(t - 1) * batch * hd + b * hd..][..hd].copy_from_slice(&dx[b * 2 * hd + hd..(b + 1) * 2 * hd]);
                    }
                    let dxs = self.s_task_lstm[task].backward(&sc.task[task], dh_task, &mut grads.s_task_lstm[task]);
                    for step in 0..t {
                        dsh[(step * rows + task * batch) * hd..][..batch * hd]
                            .copy_from_slice(&dxs[step * batch * hd..(step + 1) * batch * hd]);
                    }
                }
                let dp = self.s_lstm.backward(&sc.s_lstm, dsh, &mut grads.s_lstm);
                let total = t * rows;
                let mut ds_a = vec![F::zero(); total * cv];
                let mut ds_b = vec![F::zero(); total * cm];
                let mut de_a = vec![F::zero(); total * cv];
                let mut de_b = vec![F::zero(); total * cm];
                for r in 0..total {
                    let d = &dp[r * si..(r + 1) * si];
                    for j in 0..cv {
                        let i = r * cv + j;
                        ds_a[i] = d[j] * (F::one() + sc.e_a[i]);
                        de_a[i] = d[j] * sc.s_a[i];
                    }
                    for j in 0..cm {
                        let i = r * cm + j;
                        ds_b[i] = d[cv + j] * (F::one() + sc.e_b[i]);
                        de_b[i] = d[cv + j] * sc.s_b[i];
                    }
                }
                let (ga, gb) = self.mmtm.backward(&sc.mmtm, &de_a, &de_b, &mut grads.mmtm);
                out.sv = vec![F::zero(); n * k * cv];
                out.sm = vec![F::zero(); n * cm];
                for step in 0..t {
                    for task in 0..k {
                        for b in 0..batch {
                            let r = step * rows + task * batch + b;
                            let img = b * t + step;
                            let dst = &mut out.sv[(img * k + task) * cv..][..cv];
                            for j in 0..cv {
                                dst[j] = ds_a[r * cv + j] + ga[r * cv + j];
                            }
                            let dst = &mut out.sm[img * cm..(img + 1) * cm];
                            for j in 0..cm {
                                dst[j] += ds_b[r * cm + j] + gb[r * cm + j];
                            }
                        }
                    }
                }
                out.spatial_inputs = dp;
            }
        }
        let dx = self.t_lstm.backward(&cache.t_lstm, dth, &mut grads.t_lstm);
        let ti = cv + cp;
        for step in 0..t {
            for task in 0..k {
                for b in 0..batch {
                    let img = b * t + step;
                    let src = &dx[(step * rows + task * batch + b) * ti..][..ti];
                    out.tv[(img * k + task) * cv..][..cv].copy_from_slice(&src[..cv]);
                    out.tp[(img * k + task) * cp..][..cp].copy_from_slice(&src[cv..]);
                }
            }
        }
        out.temporal_inputs = dx;
        out
    }

    // -----------------------------------------------------------------------
    // convenience entry points

    /// Training-mode forward and backward for a batch. `dloss` maps logits
    /// `[b][task]` to `(loss, dlogits)`.
    pub fn loss_and_grad(
        &mut self,
        input: &BatchInput<F>,
        graph: Graph,
        grads: &mut Network<F>,
        dloss: impl FnOnce(&[F], &BatchInput<F>) -> (F, Vec<F>),
    ) -> Result<(F, Vec<F>)> {
        let (feats, fcache) = self.features_train(input, graph)?;
        let (logits, tcache) = self.top_forward(&feats, input.batch, graph)?;
        let (loss, dlogits) = dloss(&logits, input);
        let fg = self.top_backward(&tcache, &dlogits, grads);
        self.features_backward(input, &fcache, &fg, grads);
        Ok((loss, logits))
    }

    /// Inference-mode logits `[b][task]`.
    pub fn logits(&self, input: &BatchInput<F>, graph: Graph) -> Result<Vec<F>> {
        let (feats, _) = self.features_eval(input, graph, &KeepMaps::default())?;
        Ok(self.top_forward(&feats, input.batch, graph)?.0)
    }

    /// Inference-mode probabilities `[b][task]`.
    pub fn probabilities(&self, input: &BatchInput<F>, graph: Graph) -> Result<Vec<F>> {
        Ok(self.logits(input, graph)?.into_iter().map(sigmoid).collect())
    }
}

impl Network<f32> {
    /// Convert precision, keeping every value (used by gradient checks).
    pub fn to_f64(&self) -> Network<f64> {
        let mut out: Network<f64> = Network::new(self.config.clone(), 0).expect("config already validated");
        if self.stage1_heads.is_empty() {
            out.discard_stage1_heads();
        }
        for (dst, src) in out.params_mut().into_iter().zip(self.params()) {
            dst.param.data = src.param.data.iter().map(|&v| v as f64).collect();
        }
        for ((_, dst), (_, src)) in out.buffers_mut().into_iter().zip(self.buffers()) {
            *dst = src.iter().map(|&v| v as f64).collect();
        }
        out
    }
}
