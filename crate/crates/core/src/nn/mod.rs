//! A small CPU neural-network engine: convolution, pooling, dense, ReLU and
//! forget layers with hand-derived backpropagation and plain SGD.

mod arch;
pub mod gradcheck;
mod layers;
mod loss;
mod network;

pub use arch::{Architecture, LayerSpec};
pub use loss::{per_sample_cross_entropy, softmax_cross_entropy};
pub use network::{Activations, Network, Param, ParamKind, ParamSet};

use crate::error::{Error, Result};
use crate::forgetting::ForgetClock;
use crate::tensor::{Scalar, Tensor};

/// Batch size used for evaluation-only passes.
pub const EVAL_BATCH: usize = 500;

/// `params[i] -= lr * grads[i]`.
pub fn sgd_step<T: Scalar>(params: &mut [T], grads: &[T], lr: T) {
    debug_assert!(lr > T::zero(), "learning rate must be positive");
    assert_eq!(params.len(), grads.len(), "parameter/gradient length mismatch");
    for (p, g) in params.iter_mut().zip(grads) {
        *p = *p - lr * *g;
    }
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax<T: Scalar>(row: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// Accuracy and per-sample losses of one evaluation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalStats {
    pub accuracy: f64,
    pub mean_loss: f64,
    pub losses: Vec<f64>,
}

/// Evaluates `net` on every row of `images`, in chunks of `batch_size`.
pub fn evaluate<T: Scalar>(
    net: &Network<T>,
    images: &Tensor<T>,
    labels: &[u8],
    clock: &ForgetClock,
    batch_size: usize,
) -> Result<EvalStats> {
    let n = images.rows();
    if n == 0 {
        return Err(Error::Argument("cannot evaluate on an empty set".into()));
    }
    if labels.len() != n {
        return Err(Error::Shape(format!("{} labels for {n} images", labels.len())));
    }
    let mut correct = 0usize;
    let mut losses = Vec::with_capacity(n);
    let rows: Vec<usize> = (0..n).collect();
    for chunk in rows.chunks(batch_size.max(1)) {
        let batch = images.select_rows(chunk);
        let ys = &labels[chunk[0]..chunk[0] + chunk.len()];
        let acts = net.forward(&batch, clock)?;
        let logits = acts.logits();
        losses.extend(per_sample_cross_entropy(logits, ys)?);
        correct += ys
            .iter()
            .enumerate()
            .filter(|(i, &y)| argmax(logits.row(*i)) == y as usize)
            .count();
    }
    let mean_loss = losses.iter().sum::<f64>() / n as f64;
    Ok(EvalStats {
        accuracy: correct as f64 / n as f64,
        mean_loss,
        losses,
    })
}

/// Fraction of samples whose arg-max logit equals the label.
pub fn evaluate_accuracy<T: Scalar>(
    net: &Network<T>,
    images: &Tensor<T>,
    labels: &[u8],
    clock: &ForgetClock,
) -> Result<f64> {
    evaluate(net, images, labels, clock, EVAL_BATCH).map(|s| s.accuracy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sgd_arithmetic() {
        let mut p = [1.0f32];
        sgd_step(&mut p, &[0.5], 0.1);
        assert!((p[0] - 0.95).abs() < 1e-7);
    }

    #[test]
    fn sgd_zero_gradient_is_bit_identity() {
        let mut p = [1.0f32, -3.25e-7, 8.0e12];
        let before = p;
        sgd_step(&mut p, &[0.0; 3], 0.05);
        assert_eq!(p.map(f32::to_bits), before.map(f32::to_bits));
    }

    #[test]
    fn sgd_on_quadratic() {
        // loss = p^2 / 2, gradient = p
        let mut p = [1.0f64];
        for _ in 0..2 {
            let g = [p[0]];
            sgd_step(&mut p, &g, 0.1);
        }
        assert!((p[0] - 0.81).abs() < 1e-12);
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[0.1f32, 0.7, 0.7, 0.2]), 1);
        assert_eq!(argmax(&[0.0f32; 4]), 0);
    }
}
