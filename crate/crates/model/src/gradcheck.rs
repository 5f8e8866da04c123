//! Central-difference verification of the analytic gradients.
//!
//! Runs in `f64` on random inputs. A coordinate whose difference quotient
//! changes when the step is halved straddles a ReLU or max-pool kink and is
//! skipped; the report counts such coordinates.

use std::collections::BTreeMap;

use gazefusion_core::N_TASKS;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::input::BatchInput;
use crate::network::{Graph, Network};

pub const STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupError {
    /// `||a - n|| / (||a|| + ||n||)` over the sampled coordinates
    pub relative: f64,
    pub analytic_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub groups: BTreeMap<String, GroupError>,
    pub checked: usize,
    pub kinked: usize,
}

impl GradCheckReport {
    pub fn worst(&self) -> f64 {
        self.groups.values().map(|g| g.relative).fold(0.0, f64::max)
    }

    pub fn silent_groups(&self) -> Vec<&str> {
        self.groups.iter().filter(|(_, g)| g.analytic_norm == 0.0).map(|(n, _)| n.as_str()).collect()
    }
}

pub fn random_batch(cfg: &ModelConfig, batch: usize, seed: u64) -> BatchInput<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = batch * cfg.steps;
    let draw = |rng: &mut ChaCha8Rng, len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(0.0..1.0)).collect() };
    BatchInput {
        batch,
        steps: cfg.steps,
        frames: draw(&mut rng, n * 3 * cfg.frame_height * cfg.frame_width),
        pupil: draw(&mut rng, n * 2 * cfg.pupil_size * cfg.pupil_size),
        attention: draw(&mut rng, n * cfg.map_height * cfg.map_width),
        labels: (0..batch).map(|_| std::array::from_fn(|_| rng.random_range(0..2u8))).collect(),
    }
}

/// Mean binary cross-entropy over logits `[b][task]` and its gradient.
pub fn bce_from_logits(logits: &[f64], input: &BatchInput<f64>) -> (f64, Vec<f64>) {
    let scale = 1.0 / logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (i, &z) in logits.iter().enumerate() {
        let y = input.labels[i / N_TASKS][i % N_TASKS] as f64;
        loss += (z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z) * scale;
        grad.push((1.0 / (1.0 + (-z).exp()) - y) * scale);
    }
    (loss, grad)
}

fn loss(net: &Network<f64>, input: &BatchInput<f64>, graph: Graph) -> f64 {
    let mut net = net.clone();
    let mut sink = net.zeros_like();
    net.loss_and_grad(input, graph, &mut sink, bce_from_logits).expect("validated input").0
}

fn central(net: &Network<f64>, input: &BatchInput<f64>, graph: Graph, pi: usize, i: usize, h: f64) -> f64 {
    let mut plus = net.clone();
    plus.params_mut()[pi].param.data[i] += h;
    let mut minus = net.clone();
    minus.params_mut()[pi].param.data[i] -= h;
    (loss(&plus, input, graph) - loss(&minus, input, graph)) / (2.0 * h)
}

/// Compare gradients on up to `per_tensor` random coordinates of every
/// tensor that `graph` uses. Training-mode batch norm, batch of two.
pub fn check_gradients(cfg: &ModelConfig, graph: Graph, seed: u64, per_tensor: usize) -> GradCheckReport {
    let net = Network::<f64>::new(cfg.clone(), seed).expect("valid config");
    let input = random_batch(cfg, 2, seed + 100);
    let mut grads = net.zeros_like();
    net.clone().loss_and_grad(&input, graph, &mut grads, bce_from_logits).expect("validated input");
    let analytic = grads.params();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc: BTreeMap<String, (f64, f64, f64)> = BTreeMap::new();
    let (mut checked, mut kinked) = (0, 0);
    for (pi, p) in net.params().iter().enumerate() {
        let used = match graph {
            Graph::Temporal => p.group.starts_with("temporal.") || p.group.starts_with("stage1_head"),
            Graph::Full => !p.group.starts_with("stage1_head"),
        };
        if !used {
            continue;
        }
        let len = p.param.len();
        let idx = if len <= per_tensor { (0..len).collect() } else { sample(&mut rng, len, per_tensor).into_vec() };
        let e = acc.entry(p.group.clone()).or_default();
        for i in idx {
            let numeric = central(&net, &input, graph, pi, i, STEP);
            let half = central(&net, &input, graph, pi, i, STEP / 2.0);
            checked += 1;
            if (numeric - half).abs() > 1e-3 * numeric.abs().max(half.abs()) + 1e-9 {
                kinked += 1;
                continue;
            }
            let a = analytic[pi].param.data[i];
            e.0 += (a - numeric).powi(2);
            e.1 += a * a;
            e.2 += numeric * numeric;
        }
    }
    let groups = acc
        .into_iter()
        .map(|(g, (d, a, n))| {
            let relative = if d == 0.0 { 0.0 } else { d.sqrt() / (a.sqrt() + n.sqrt()) };
            (g, GroupError { relative, analytic_norm: a.sqrt() })
        })
        .collect();
    GradCheckReport { groups, checked, kinked }
}
