use crate::error::{Error, Result};

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

/// Cross-entropy of `softmax(logits)` against `label`, and its gradient
/// with respect to the logits (`softmax - one_hot(label)`).
pub fn softmax_cross_entropy(logits: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
    if label >= logits.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            logits.len()
        )));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_total = logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    let loss = -(logits[label] - max - log_total);
    let mut grad = softmax(logits);
    grad[label] -= 1.0;
    // Clamp roundoff below zero; NaN passes through.
    Ok((if loss < 0.0 { 0.0 } else { loss }, grad))
}
