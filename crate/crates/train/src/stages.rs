//! Stage one (temporal pretraining) and stage three (joint fine-tuning).

use std::collections::HashMap;

use gazefusion_core::N_TASKS;
use gazefusion_model::{BatchInput, Graph, ModalityPolicy, ModalityStats, Network};
use gazefusion_preprocess::AlignedSample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adam::Adam;
use crate::config::TrainConfig;
use crate::error::{Error, Result};
use crate::history::{EpochRecord, StageTag, TrainHistory};
use crate::loss::{bce_loss, bce_with_logits};
use crate::transfer::{FreezeMask, TARGET_GROUP};

/// Trials plus how their gaze streams reach the network.
#[derive(Debug, Clone, Copy)]
pub struct StageData<'a> {
    pub train: &'a [AlignedSample],
    /// May be empty, which disables early stopping.
    pub val: &'a [AlignedSample],
    pub policy: ModalityPolicy,
    pub stats: Option<&'a ModalityStats>,
}

fn trains_group(tag: StageTag, group: &str) -> bool {
    match tag {
        StageTag::Stage1 => group.starts_with("temporal.") || group.starts_with("stage1_head."),
        StageTag::Stage3 => !group.starts_with("stage1_head."),
    }
}

fn graph_of(tag: StageTag) -> Graph {
    match tag {
        StageTag::Stage1 => Graph::Temporal,
        StageTag::Stage3 => Graph::Full,
    }
}

fn batch(samples: &[&AlignedSample], net: &Network<f32>, data: &StageData) -> Result<BatchInput<f32>> {
    Ok(BatchInput::from_samples(samples, &net.config, data.policy, data.stats)?)
}

/// Inference-mode loss and per-dimension accuracy.
pub fn score(
    net: &Network<f32>,
    trials: &[AlignedSample],
    graph: Graph,
    data: &StageData,
    threshold: f64,
    batch_size: usize,
) -> Result<(f64, [f64; N_TASKS])> {
    let mut probs = Vec::new();
    let mut labels = Vec::new();
    for chunk in trials.chunks(batch_size.max(1)) {
        let refs: Vec<&AlignedSample> = chunk.iter().collect();
        let input = batch(&refs, net, data)?;
        probs.extend(net.probabilities(&input, graph)?.into_iter().map(|p| p as f64));
        labels.extend(chunk.iter().flat_map(|s| s.labels));
    }
    let loss = bce_loss(&probs, &labels);
    let mut acc = [0.0; N_TASKS];
    for (i, (p, y)) in probs.iter().zip(&labels).enumerate() {
        acc[i % N_TASKS] += ((*p > threshold) == (*y == 1)) as u8 as f64;
    }
    let n = trials.len() as f64;
    Ok((loss, acc.map(|a| a / n)))
}

/// Stream key for the batch order of one epoch.
fn epoch_seed(seed: u64, tag: StageTag, epoch: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ ((tag as u64) << 32) ^ epoch as u64
}

fn run_stage(
    net: &mut Network<f32>,
    tag: StageTag,
    data: &StageData,
    cfg: &TrainConfig,
    epochs: usize,
    mask: Option<&FreezeMask>,
) -> Result<TrainHistory> {
    cfg.validate()?;
    if data.train.is_empty() {
        return Err(Error::Config("no training trials".into()));
    }
    let graph = graph_of(tag);
    let params = net.params();
    let active: Vec<usize> = params.iter().enumerate().filter(|(_, p)| trains_group(tag, &p.group)).map(|(i, _)| i).collect();
    let frozen: HashMap<usize, Vec<bool>> = match mask {
        None => HashMap::new(),
        Some(m) => params
            .iter()
            .enumerate()
            .filter(|(_, p)| p.group == TARGET_GROUP)
            .filter_map(|(i, p)| m.key_of(&p.name).map(|k| (i, m.element_mask(k))))
            .collect(),
    };
    drop(params);
    let is_frozen = |i: usize, j: usize| frozen.get(&i).is_some_and(|m| m[j]);
    let mut adam = Adam::new(net, active, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps);
    let mut grads = net.zeros_like();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, usize, Network<f32>)> = None;
    let mut since_best = 0usize;
    let mut order: Vec<usize> = (0..data.train.len()).collect();
    let mut stop = epochs;
    for epoch in 1..=epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(epoch_seed(cfg.seed, tag, epoch));
        order.sort_unstable();
        order.shuffle(&mut rng);
        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
            let refs: Vec<&AlignedSample> = idx.iter().map(|&i| &data.train[i]).collect();
            let input = batch(&refs, net, data)?;
            for p in grads.params_mut() {
                p.param.zero_();
            }
            let labels: Vec<u8> = input.labels.iter().flatten().copied().collect();
            let mut batch_loss = 0.0;
            let (_, logits) = net.loss_and_grad(&input, graph, &mut grads, |z, _| {
                let (l, g) = bce_with_logits(z, &labels);
                batch_loss = l;
                (l as f32, g)
            })?;
            if !batch_loss.is_finite() {
                return Err(Error::NonFinite {
                    stage: tag.name().into(),
                    epoch,
                    batch: b,
                    detail: format!("loss {batch_loss}, max |logit| {}", logits.iter().fold(0f32, |m, v| m.max(v.abs()))),
                });
            }
            adam.update(net, &grads, &is_frozen);
            loss_sum += batch_loss * idx.len() as f64;
            hits += logits.iter().zip(&labels).filter(|(z, y)| (**z > 0.0) == (**y == 1)).count();
        }
        let n = data.train.len() as f64;
        let train_loss = loss_sum / n;
        let train_accuracy = hits as f64 / (n * N_TASKS as f64);
        let (val_loss, val_accuracy) = if data.val.is_empty() {
            (None, None)
        } else {
            let (l, a) = score(net, data.val, graph, data, cfg.threshold, cfg.batch_size)?;
            if !l.is_finite() {
                return Err(Error::NonFinite { stage: tag.name().into(), epoch, batch: 0, detail: "validation loss".into() });
            }
            (Some(l), Some(a))
        };
        history.epochs.push(EpochRecord { stage: tag, epoch, train_loss, train_accuracy, val_loss, val_accuracy });
        if let Some(vl) = val_loss {
            if best.as_ref().is_none_or(|(b, _, _)| vl < *b) {
                best = Some((vl, epoch, net.clone()));
                since_best = 0;
            } else {
                since_best += 1;
            }
            if since_best >= cfg.patience {
                stop = epoch;
                break;
            }
        }
        if cfg.target_train_accuracy.is_some_and(|t| train_accuracy >= t) {
            stop = epoch;
            break;
        }
    }
    let kept = match best {
        Some((_, e, snapshot)) => {
            *net = snapshot;
            e
        }
        None => stop,
    };
    history.best_epoch.push((tag, kept));
    history.stop_epoch.push((tag, stop));
    Ok(history)
}

/// Train the temporal branch with the temporary heads. The spatial branch
/// is not part of the graph.
pub fn stage1_pretrain(net: &mut Network<f32>, data: &StageData, cfg: &TrainConfig) -> Result<TrainHistory> {
    if net.stage1_heads.is_empty() {
        return Err(Error::Config("stage one needs the temporary heads, which have been discarded".into()));
    }
    run_stage(net, StageTag::Stage1, data, cfg, cfg.stage1_epochs, None)
}

/// Train both branches and the final heads; `mask` entries never change.
pub fn stage3_joint_finetune(
    net: &mut Network<f32>,
    mask: &FreezeMask,
    data: &StageData,
    cfg: &TrainConfig,
) -> Result<TrainHistory> {
    if !net.stage1_heads.is_empty() {
        return Err(Error::Config("stage three requires the stage-two transfer first".into()));
    }
    run_stage(net, StageTag::Stage3, data, cfg, cfg.stage3_epochs, Some(mask))
}
