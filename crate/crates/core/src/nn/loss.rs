use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;

/// A differentiable scalar head applied to a network output.
pub trait LossHead {
    /// Returns the loss and its gradient with respect to the network output.
    fn loss_grad(&self, output: &Tensor) -> Result<(f64, Tensor)>;
}

/// Mean binary cross entropy over all elements, computed from logits.
///
/// Per element: `max(z,0) - z*t + ln(1 + exp(-|z|))`, the standard stable form.
/// The gradient is `(sigma(z) - t) / n`.
pub fn bce_with_logits(logits: &Tensor, targets: &[f64]) -> Result<(f64, Tensor)> {
    if logits.len() != targets.len() {
        return Err(Error::ShapeMismatch {
            expected: vec![targets.len()],
            got: logits.shape().to_vec(),
        });
    }
    if targets.iter().any(|t| *t != 0.0 && *t != 1.0) {
        return Err(Error::invalid("bce targets must be 0 or 1"));
    }
    let n = logits.len() as f64;
    let mut loss = 0.0;
    let mut grad = logits.clone();
    for (g, (&z, &t)) in grad.data_mut().iter_mut().zip(logits.data().iter().zip(targets)) {
        loss += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
        *g = (super::layers::sigmoid(z) - t) / n;
    }
    Ok((loss / n, grad))
}

/// BCE-from-logits head for training classifiers.
pub struct BceWithLogits {
    pub targets: Vec<f64>,
}

impl LossHead for BceWithLogits {
    fn loss_grad(&self, output: &Tensor) -> Result<(f64, Tensor)> {
        bce_with_logits(output, &self.targets)
    }
}

/// Fixed linear functional `sum_i c_i * out_i`; handy for gradient checking
/// layers whose output is not a classifier head.
pub struct WeightedSum {
    pub weights: Vec<f64>,
}

impl LossHead for WeightedSum {
    fn loss_grad(&self, output: &Tensor) -> Result<(f64, Tensor)> {
        if output.len() != self.weights.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![self.weights.len()],
                got: output.shape().to_vec(),
            });
        }
        let loss = output.data().iter().zip(&self.weights).map(|(o, w)| o * w).sum();
        let grad = Tensor::from_vec(output.shape(), self.weights.clone())?;
        Ok((loss, grad))
    }
}
