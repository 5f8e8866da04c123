//! Binary cross-entropy over the task outputs.

/// Probabilities are kept this far from 0 and 1.
pub const CLAMP: f64 = 1e-7;

/// Mean binary cross-entropy over all entries.
pub fn bce_loss(probs: &[f64], labels: &[u8]) -> f64 {
    assert_eq!(probs.len(), labels.len(), "one label per probability");
    let n = probs.len().max(1) as f64;
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(CLAMP, 1.0 - CLAMP);
            if y == 1 {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum::<f64>()
        / n
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss and its gradient with respect to the logits. The gradient is the
/// unclamped `(p - y) / n`, so saturated outputs still receive a signal.
pub fn bce_with_logits(logits: &[f32], labels: &[u8]) -> (f64, Vec<f32>) {
    let n = logits.len().max(1) as f64;
    let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z as f64)).collect();
    let loss = bce_loss(&probs, labels);
    let grad = probs.iter().zip(labels).map(|(p, &y)| ((p - y as f64) / n) as f32).collect();
    (loss, grad)
}
