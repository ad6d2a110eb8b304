use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

fn check_labels<T: Scalar>(logits: &Tensor<T>, labels: &[u8]) -> Result<usize> {
    let classes = logits.row_len();
    if labels.len() != logits.rows() {
        return Err(Error::Shape(format!(
            "{} labels for a batch of {}",
            labels.len(),
            logits.rows()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y as usize >= classes) {
        return Err(Error::Data(format!(
            "label {bad} outside class range 0..{classes}"
        )));
    }
    Ok(classes)
}

/// Numerically stable `log(sum(exp(row)))` and the row maximum.
fn log_sum_exp<T: Scalar>(row: &[T]) -> (T, T) {
    let max = row.iter().copied().fold(T::neg_infinity(), T::max);
    let sum = row.iter().fold(T::zero(), |acc, &z| acc + (z - max).exp());
    (max + sum.ln(), max)
}

/// Cross-entropy of each sample, `-log softmax(logits)[label]`.
pub fn per_sample_cross_entropy<T: Scalar>(logits: &Tensor<T>, labels: &[u8]) -> Result<Vec<f64>> {
    check_labels(logits, labels)?;
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            let row = logits.row(i);
            let (lse, _) = log_sum_exp(row);
            (lse - row[y as usize]).to_real().max(0.0)
        })
        .collect())
}

/// Mean cross-entropy over the batch and its gradient w.r.t. the logits,
/// `(softmax - onehot) / batch`.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[u8],
) -> Result<(f64, Tensor<T>)> {
    let classes = check_labels(logits, labels)?;
    let n = logits.rows();
    if n == 0 {
        return Err(Error::Argument("empty batch".into()));
    }
    let inv_n = T::one() / T::from_real(n as f64);
    let mut grad = Vec::with_capacity(n * classes);
    let mut total = T::zero();
    for (i, &y) in labels.iter().enumerate() {
        let row = logits.row(i);
        let (lse, _) = log_sum_exp(row);
        total = total + (lse - row[y as usize]);
        for (c, &z) in row.iter().enumerate() {
            let p = (z - lse).exp();
            let target = if c == y as usize { T::one() } else { T::zero() };
            grad.push((p - target) * inv_n);
        }
    }
    let loss = total.to_real() / n as f64;
    Ok((loss, Tensor::new(logits.shape().to_vec(), grad)?))
}
