//! Fixtures shared by the benchmarks.

use fnn_core::{Rng, Tensor};

/// A batch of `n` uniform 28x28 images with cycling labels.
pub fn image_batch(n: usize, seed: u64) -> (Tensor, Vec<u8>) {
    let mut images = Tensor::zeros(vec![n, 28, 28]);
    Rng::new(seed).fill_uniform(images.data_mut(), 0.0, 1.0);
    let labels = (0..n).map(|i| (i % 10) as u8).collect();
    (images, labels)
}

/// `n` losses drawn uniformly from `[lo, hi)`.
pub fn losses(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<f64> {
    let mut rng = Rng::new(seed);
    (0..n).map(|_| rng.uniform(lo, hi)).collect()
}
