//! Weighted binary cross-entropy.

use crate::error::{Error, Result};

/// Probabilities are clipped to `[PROB_CLIP, 1-PROB_CLIP]` before logs.
pub const PROB_CLIP: f64 = 1e-7;

/// Weighted binary cross-entropy, normalized by the total weight:
/// `loss = Σ w·(-y·ln p - (1-y)·ln(1-p)) / Σ w`.
///
/// Returns the loss and its gradient w.r.t. each probability. Clipped
/// probabilities get zero gradient (the clip is a constant region).
pub fn weighted_bce(probs: &[f64], labels: &[u8], weights: &[f64]) -> Result<(f64, Vec<f64>)> {
    if probs.len() != labels.len() || probs.len() != weights.len() {
        return Err(Error::ShapeMismatch(format!(
            "bce lengths differ: {} probs, {} labels, {} weights",
            probs.len(),
            labels.len(),
            weights.len()
        )));
    }
    if probs.is_empty() {
        return Err(Error::InvalidInput("bce over empty batch".into()));
    }
    let total_weight: f64 = weights.iter().sum();
    let mut loss = 0.0;
    let mut grad = vec![0.0; probs.len()];
    for idx in 0..probs.len() {
        let clipped = probs[idx].clamp(PROB_CLIP, 1.0 - PROB_CLIP);
        let y = labels[idx] as f64;
        loss += weights[idx] * (-y * clipped.ln() - (1.0 - y) * (1.0 - clipped).ln());
        if probs[idx] > PROB_CLIP && probs[idx] < 1.0 - PROB_CLIP {
            grad[idx] = weights[idx] * (-y / clipped + (1.0 - y) / (1.0 - clipped)) / total_weight;
        }
    }
    Ok((loss / total_weight, grad))
}
