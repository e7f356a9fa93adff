//! Softmax and sparse categorical cross-entropy.

use super::tensor::{Scalar, TensorOf};
use super::NnError;

/// Probability floor before the log, preventing log(0).
pub const PROB_FLOOR: f64 = 1e-7;

/// Numerically stable softmax over the last axis of a rank-1 or rank-2
/// tensor (the row maximum is subtracted before exponentiation).
pub fn softmax<T: Scalar>(logits: &TensorOf<T>) -> TensorOf<T> {
    let (rows, k) = match logits.rank() {
        1 => (1, logits.shape()[0]),
        2 => logits.dims2(),
        r => panic!("softmax expects rank 1 or 2, got {r}"),
    };
    let mut out = Vec::with_capacity(rows * k);
    for row in logits.data().chunks_exact(k) {
        let max = row.iter().cloned().fold(T::neg_infinity(), T::max);
        let exps: Vec<T> = row.iter().map(|&v| (v - max).exp()).collect();
        let sum = exps.iter().fold(T::zero(), |a, &b| a + b);
        out.extend(exps.iter().map(|&e| e / sum));
    }
    TensorOf::from_vec(logits.shape(), out)
}

/// Mean over the batch of -log(probability of the true class), with the
/// probability clamped below at [`PROB_FLOOR`]. Also returns the gradient
/// with respect to the *logits* under the fused softmax + cross-entropy
/// rule, `(probs - onehot) / batch`.
pub fn sparse_ce_loss<T: Scalar>(
    probs: &TensorOf<T>,
    labels: &[usize],
) -> Result<(T, TensorOf<T>), NnError> {
    let (batch, k) = probs.dims2();
    if batch == 0 {
        return Err(NnError::EmptyBatch);
    }
    assert_eq!(labels.len(), batch, "one label per row");
    for (index, &label) in labels.iter().enumerate() {
        if label >= k {
            return Err(NnError::LabelOutOfRange {
                index,
                label,
                classes: k,
            });
        }
    }
    let floor = T::from_f64(PROB_FLOOR);
    let count = T::from_f64(batch as f64);
    let mut loss = T::zero();
    let mut dlogits = Vec::with_capacity(batch * k);
    for (row, &label) in probs.data().chunks_exact(k).zip(labels) {
        let p = row[label].max(floor);
        loss = loss - p.ln();
        for (c, &q) in row.iter().enumerate() {
            let onehot = if c == label { T::one() } else { T::zero() };
            dlogits.push((q - onehot) / count);
        }
    }
    Ok((loss / count, TensorOf::from_vec(probs.shape(), dlogits)))
}
