//! Central finite-difference gradient checking in 64-bit arithmetic.

use crate::error::Result;
use crate::forgetting::{ForgetClock, TauAssignment};
use crate::nn::{Architecture, LayerSpec, Network};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Default finite-difference step.
pub const STEP: f64 = 1e-5;

/// Gradients smaller than this are compared in absolute rather than relative terms.
pub const ABS_FLOOR: f64 = 1e-6;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(ABS_FLOOR)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// (parameter entry, element) with the largest error.
    pub worst: (usize, usize),
    pub checked: usize,
}

/// Compares backprop against `(L(p + h) - L(p - h)) / 2h` for every parameter.
pub fn check_gradients(
    net: &mut Network<f64>,
    batch: &Tensor<f64>,
    labels: &[u8],
    clock: &ForgetClock,
    h: f64,
) -> Result<GradCheckReport> {
    net.loss_and_grad(batch, labels, clock)?;
    let analytic: Vec<Vec<f64>> = net
        .params()
        .entries()
        .iter()
        .map(|p| p.grad.data().to_vec())
        .collect();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: (0, 0),
        checked: 0,
    };
    let loss = |net: &Network<f64>| -> Result<f64> {
        let acts = net.forward(batch, clock)?;
        let (l, _) = crate::nn::softmax_cross_entropy(acts.logits(), labels)?;
        Ok(l)
    };
    for (e, grads) in analytic.iter().enumerate() {
        for (i, &a) in grads.iter().enumerate() {
            let orig = net.params().entries()[e].value.data()[i];
            net.params_mut().entries_mut()[e].value.data_mut()[i] = orig + h;
            let plus = loss(net)?;
            net.params_mut().entries_mut()[e].value.data_mut()[i] = orig - h;
            let minus = loss(net)?;
            net.params_mut().entries_mut()[e].value.data_mut()[i] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            let err = relative_error(a, numeric);
            if err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = (e, i);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}

/// A randomly shaped small problem for gradient checking.
pub struct GradCheckCase {
    pub net: Network<f64>,
    pub batch: Tensor<f64>,
    pub labels: Vec<u8>,
    pub clock: ForgetClock,
}

/// Draws a small MLP or CNN (at most a few thousand parameters) with random
/// weights, inputs, labels and an active forgetting clock.
pub fn random_case(rng: &mut Rng) -> GradCheckCase {
    let classes = 2 + rng.below(4) as usize;
    let pick = |rng: &mut Rng, lo: usize, hi: usize| lo + rng.below((hi - lo + 1) as u64) as usize;
    let arch = if rng.below(2) == 0 {
        let side = pick(rng, 2, 5);
        let h1 = pick(rng, 3, 12);
        let h2 = pick(rng, 3, 8);
        Architecture::mlp(&[1, side, side], &[h1, h2], classes).expect("valid mlp")
    } else {
        let channels = pick(rng, 1, 2);
        let side = pick(rng, 6, 8);
        let filters = pick(rng, 2, 3);
        let pooled = (side - 2) / 2;
        let hidden = pick(rng, 3, 8);
        Architecture::new(
            vec![channels, side, side],
            vec![
                LayerSpec::Conv2d {
                    in_channels: channels,
                    out_channels: filters,
                    kernel: 3,
                },
                LayerSpec::Relu,
                LayerSpec::MaxPool2,
                LayerSpec::Flatten,
                LayerSpec::Dense {
                    inputs: filters * pooled * pooled,
                    outputs: hidden,
                },
                LayerSpec::Relu,
                LayerSpec::Forget,
                LayerSpec::Dense {
                    inputs: hidden,
                    outputs: classes,
                },
            ],
        )
        .expect("valid cnn")
    };
    let mut net = Network::<f64>::new(arch, rng);
    // Non-zero biases so that the bias paths are exercised.
    for p in net.params_mut().entries_mut() {
        if p.kind == crate::nn::ParamKind::Bias {
            rng.fill_uniform(p.value.data_mut(), -0.1, 0.1);
        }
    }
    let n = pick(rng, 2, 5);
    let mut shape = vec![n];
    shape.extend_from_slice(net.arch().input_shape());
    let mut batch = Tensor::<f64>::zeros(shape);
    rng.fill_uniform(batch.data_mut(), -1.0, 1.0);
    let labels = (0..n).map(|_| rng.below(classes as u64) as u8).collect();
    let t = rng.below(5) as u32;
    let assignments = net
        .arch()
        .forget_widths()
        .into_iter()
        .enumerate()
        .map(|(slot, width)| {
            let taus = (0..width).map(|_| rng.uniform(0.5, 8.0)).collect();
            TauAssignment::new(slot, taus).expect("positive taus")
        })
        .collect();
    GradCheckCase {
        net,
        batch,
        labels,
        clock: ForgetClock::new(t, assignments),
    }
}
