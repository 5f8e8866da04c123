use gazefusion_core::N_TASKS;
use rand_distr::{Distribution, Normal};

use crate::observer::{SimObserver, TrialLatents};
use crate::scene::{SceneParams, MAX_CLUTTER};
use crate::seed;

/// Weights of the centred terms `[brightness, clutter, alignment,
/// natural, exploration, interest]` for each subjective dimension, in
/// dimension-id order starting at `color_comfort`. Each row has absolute
/// sum 2, so the mixture spans the whole scale.
pub const SUBJECTIVE_WEIGHTS: [[f64; 6]; 11] = [
    [0.3, 0.0, 0.0, 0.7, 0.0, 1.0],
    [0.0, 0.5, 0.0, 0.0, 0.4, 1.1],
    [0.6, 0.0, 0.0, 0.4, 0.0, 1.0],
    [0.0, 0.8, 0.0, 0.0, 1.2, 0.0],
    [0.5, 0.0, 0.0, 0.5, 1.0, 0.0],
    [0.0, -0.5, 0.5, 0.0, 0.0, 1.0],
    [0.0, -0.5, 0.0, 0.5, -1.0, 0.0],
    [0.3, 0.0, 0.0, 0.7, 0.0, 1.0],
    [0.8, 0.0, 0.0, 0.0, 0.4, 0.8],
    [0.4, 0.0, 0.6, 0.0, 0.0, 1.0],
    [0.0, 0.8, 0.0, 0.0, 1.2, 0.0],
];

/// Noise-free position of each objective dimension on the 1..7 scale.
pub fn objective_scores(p: &SceneParams) -> [f64; 4] {
    [
        1.0 + 6.0 * p.brightness,
        1.0 + 6.0 * p.clutter_count as f64 / MAX_CLUTTER as f64,
        1.0 + 6.0 * p.alignment,
        1.0 + 6.0 * p.natural_fraction,
    ]
}

/// Noise-free position of each subjective dimension on the 1..7 scale.
pub fn subjective_scores(p: &SceneParams, l: &TrialLatents) -> [f64; 11] {
    let terms = [
        p.brightness - 0.5,
        p.clutter_count as f64 / MAX_CLUTTER as f64 - 0.5,
        p.alignment - 0.5,
        p.natural_fraction - 0.5,
        l.exploration - 0.5,
        l.interest - 0.5,
    ];
    SUBJECTIVE_WEIGHTS.map(|w| 4.0 + 3.0 * w.iter().zip(&terms).map(|(a, b)| a * b).sum::<f64>())
}

/// Integer ratings for one trial, ordered by dimension id.
pub fn gen_labels(params: &SceneParams, observer: &SimObserver, latents: &TrialLatents, seed: u64) -> [u8; N_TASKS] {
    let mut rng = seed::rng(seed, seed::LABELS, 0);
    let noise = Normal::new(0.0, observer.rating_noise.max(0.0)).expect("finite noise");
    let obj = objective_scores(params);
    let subj = subjective_scores(params, latents);
    std::array::from_fn(|d| {
        // objective ratings are deterministic; noise enters subjective ones only
        let (base, e) = if d < 4 {
            (obj[d], 0.0)
        } else if observer.rating_noise > 0.0 {
            (subj[d - 4], noise.sample(&mut rng))
        } else {
            (subj[d - 4], 0.0)
        };
        (base + observer.rating_bias[d] + e).round().clamp(1.0, 7.0) as u8
    })
}
