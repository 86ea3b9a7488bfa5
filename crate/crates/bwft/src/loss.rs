//! Categorical cross-entropy.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Floor applied to the predicted probability before the log.
const PROB_FLOOR: f32 = 1e-12;

/// Mean categorical cross-entropy over a batch, with the gradient of the loss
/// with respect to the pre-softmax logits (softmax and cross-entropy are
/// fused for the backward pass, so the returned gradient is
/// `(probs - one_hot) / batch` and must be injected *below* the final softmax
/// layer).
pub fn cross_entropy(probs: &Tensor, one_hot: &Tensor) -> Result<(f32, Tensor)> {
    if probs.shape() != one_hot.shape() {
        return Err(Error::config(format!(
            "cross-entropy batch mismatch: probs {:?} vs targets {:?}",
            probs.shape(),
            one_hot.shape()
        )));
    }
    let classes = *probs.shape().last().ok_or_else(|| Error::config("empty probs"))?;
    let batch = probs.len() / classes;

    let mut loss = 0.0f32;
    for (prow, trow) in probs.data().chunks(classes).zip(one_hot.data().chunks(classes)) {
        debug_assert!((prow.iter().sum::<f32>() - 1.0).abs() < 1e-5);
        let p_true: f32 = prow.iter().zip(trow).map(|(p, t)| p * t).sum();
        loss -= p_true.max(PROB_FLOOR).ln();
    }
    loss /= batch as f32;

    let mut grad = probs.clone();
    let scale = 1.0 / batch as f32;
    for (g, t) in grad.data_mut().iter_mut().zip(one_hot.data()) {
        *g = (*g - t) * scale;
    }
    Ok((loss, grad))
}

/// One-hot encodes labels into a `[batch, classes]` tensor.
pub fn one_hot(labels: &[u16], classes: usize) -> Tensor {
    let mut t = Tensor::zeros(&[labels.len(), classes]);
    for (i, &l) in labels.iter().enumerate() {
        t.data_mut()[i * classes + l as usize] = 1.0;
    }
    t
}
