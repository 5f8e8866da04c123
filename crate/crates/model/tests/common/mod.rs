pub use gazefusion_model::gradcheck::{bce_from_logits, random_batch};

use gazefusion_model::{BatchInput, ModelConfig};

pub fn random_input(cfg: &ModelConfig, batch: usize, seed: u64) -> BatchInput<f64> {
    random_batch(cfg, batch, seed)
}

pub fn random_input_f32(cfg: &ModelConfig, batch: usize, seed: u64) -> BatchInput<f32> {
    let b = random_batch(cfg, batch, seed);
    let cast = |v: Vec<f64>| v.into_iter().map(|x| x as f32).collect();
    BatchInput {
        batch: b.batch,
        steps: b.steps,
        frames: cast(b.frames),
        pupil: cast(b.pupil),
        attention: cast(b.attention),
        labels: b.labels,
    }
}
