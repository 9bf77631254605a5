use crate::{Error, Result};

/// Probabilities are clamped to `[PROB_CLAMP, 1 − PROB_CLAMP]` before taking logs.
pub const PROB_CLAMP: f64 = 1e-7;

pub use crate::numkit::net_sigmoid as sigmoid;

/// Mean binary cross-entropy `−(1/N) Σ [y log p + (1 − y) log(1 − p)]`.
///
/// Returns the loss and its gradient with respect to the logits that
/// produced `probs`, `(p − y) / N`.
pub fn bce_loss(probs: &[f64], y: &[f64]) -> Result<(f64, Vec<f64>)> {
    if probs.len() != y.len() {
        return Err(Error::shape("bce_loss", probs.len(), y.len()));
    }
    if probs.is_empty() {
        return Err(Error::Contract("bce_loss on an empty batch".into()));
    }
    let n = probs.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(probs.len());
    for (&p, &t) in probs.iter().zip(y) {
        let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        loss -= t * pc.ln() + (1.0 - t) * (1.0 - pc).ln();
        grad.push((p - t) / n);
    }
    Ok((loss / n, grad))
}
