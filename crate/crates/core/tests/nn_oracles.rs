use fnn_core::nn::gradcheck::{check_gradients, random_case, STEP};
use fnn_core::nn::{per_sample_cross_entropy, Architecture, LayerSpec, ParamKind};
use fnn_core::{ForgetClock, Network, Rng, TauAssignment, Tensor};

/// Straight-loop forward pass of the default CNN in f64, written without any
/// of the crate's kernels.
fn reference_forward(net: &Network, image: &[f32]) -> Vec<f64> {
    let p = |layer: usize, kind: ParamKind| -> Vec<f64> {
        net.params()
            .get(layer, kind)
            .unwrap()
            .value
            .data()
            .iter()
            .map(|&v| v as f64)
            .collect()
    };
    let conv = |x: &[f64], c: usize, h: usize, w: usize, layer: usize, oc: usize| {
        let (wt, b) = (p(layer, ParamKind::Weight), p(layer, ParamKind::Bias));
        let (oh, ow) = (h - 2, w - 2);
        let mut y = vec![0.0; oc * oh * ow];
        for o in 0..oc {
            for i in 0..oh {
                for j in 0..ow {
                    let mut s = b[o];
                    for ch in 0..c {
                        for ki in 0..3 {
                            for kj in 0..3 {
                                s += wt[((o * c + ch) * 3 + ki) * 3 + kj]
                                    * x[(ch * h + i + ki) * w + j + kj];
                            }
                        }
                    }
                    y[(o * oh + i) * ow + j] = s.max(0.0);
                }
            }
        }
        y
    };
    let pool = |x: &[f64], c: usize, h: usize, w: usize| {
        let (oh, ow) = (h / 2, w / 2);
        let mut y = vec![0.0; c * oh * ow];
        for ch in 0..c {
            for i in 0..oh {
                for j in 0..ow {
                    let at = |di: usize, dj: usize| x[(ch * h + 2 * i + di) * w + 2 * j + dj];
                    y[(ch * oh + i) * ow + j] = at(0, 0).max(at(0, 1)).max(at(1, 0)).max(at(1, 1));
                }
            }
        }
        y
    };
    let dense = |x: &[f64], layer: usize, relu: bool| {
        let (wt, b) = (p(layer, ParamKind::Weight), p(layer, ParamKind::Bias));
        let n_in = x.len();
        (0..b.len())
            .map(|o| {
                let s = b[o] + (0..n_in).map(|i| wt[o * n_in + i] * x[i]).sum::<f64>();
                if relu {
                    s.max(0.0)
                } else {
                    s
                }
            })
            .collect::<Vec<f64>>()
    };
    let x: Vec<f64> = image.iter().map(|&v| v as f64).collect();
    let x = pool(&conv(&x, 1, 28, 28, 0, 8), 8, 26, 26);
    let x = pool(&conv(&x, 8, 13, 13, 3, 16), 16, 11, 11);
    let x = dense(&x, 7, true);
    let x = dense(&x, 10, true);
    dense(&x, 13, false)
}

#[test]
fn default_cnn_matches_naive_reference() {
    let arch = Architecture::default_cnn();
    let mut net = Network::<f32>::new(arch, &mut Rng::new(42));
    let mut rng = Rng::new(43);
    for p in net.params_mut().entries_mut() {
        if p.kind == ParamKind::Bias {
            rng.fill_uniform(p.value.data_mut(), -0.1, 0.1);
        }
    }
    let mut batch = Tensor::zeros(vec![8, 28, 28]);
    rng.fill_uniform(batch.data_mut(), 0.0, 1.0);
    let acts = net.forward(&batch, &ForgetClock::disabled()).unwrap();
    let wide = net.cast::<f64>();
    let wide_acts = wide.forward(&batch.cast(), &ForgetClock::disabled()).unwrap();
    for b in 0..8 {
        let want = reference_forward(&net, batch.row(b));
        let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (got, w) in wide_acts.logits().row(b).iter().zip(&want) {
            assert!((got - w).abs() <= 1e-10 * scale, "sample {b}: {got} vs {w}");
        }
        // Single precision, measured against the sample's largest logit.
        for (got, w) in acts.logits().row(b).iter().zip(&want) {
            assert!((*got as f64 - w).abs() <= 1e-5 * scale, "sample {b}: {got} vs {w}");
        }
    }
}

#[test]
fn backprop_matches_finite_differences_on_100_nets() {
    let mut rng = Rng::new(2024);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let mut c = random_case(&mut rng);
        assert!(c.net.param_count() <= 10_000);
        let report = check_gradients(&mut c.net, &c.batch, &c.labels, &c.clock, STEP).unwrap();
        assert!(
            report.max_rel_error <= 1e-4,
            "case {case}: relative error {} at {:?}",
            report.max_rel_error,
            report.worst
        );
        worst = worst.max(report.max_rel_error);
    }
    eprintln!("worst relative gradient error over 100 nets: {worst:.2e}");
}

fn with_clock(net: &Network, t: u32, rng: &mut Rng) -> ForgetClock {
    let assignments = net
        .arch()
        .forget_widths()
        .into_iter()
        .enumerate()
        .map(|(slot, w)| {
            TauAssignment::new(slot, (0..w).map(|_| rng.uniform(0.5, 8.0)).collect()).unwrap()
        })
        .collect();
    ForgetClock::new(t, assignments)
}

#[test]
fn zero_time_is_bit_identical_to_removing_forget_layers() {
    let mut rng = Rng::new(5);
    for arch in [
        Architecture::default_cnn(),
        Architecture::mlp(&[1, 28, 28], &[32, 16], 10).unwrap(),
        Architecture::mlp(&[3, 4, 4], &[7], 3).unwrap(),
    ] {
        let net = Network::<f32>::new(arch.clone(), &mut rng);
        let mut shape = vec![16];
        shape.extend_from_slice(arch.input_shape());
        let mut batch = Tensor::zeros(shape);
        rng.fill_uniform(batch.data_mut(), -1.0, 1.0);
        let clock = with_clock(&net, 0, &mut rng);
        let a = net.forward(&batch, &clock).unwrap();
        let b = net.without_forget().forward(&batch, &ForgetClock::disabled()).unwrap();
        let bits = |t: &Tensor| t.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a.logits()), bits(b.logits()));
    }
}

#[test]
fn identity_dense_forget_example() {
    let arch = Architecture::new(
        vec![2],
        vec![
            LayerSpec::Dense {
                inputs: 2,
                outputs: 2,
            },
            LayerSpec::Relu,
            LayerSpec::Forget,
        ],
    )
    .unwrap();
    let net = Network::<f32>::from_values(arch, vec![vec![1.0, 0.0, 0.0, 1.0], vec![0.0, 0.0]]).unwrap();
    let clock = ForgetClock::new(1, vec![TauAssignment::new(0, vec![1.0, 1.0]).unwrap()]);
    let acts = net
        .forward(&Tensor::new(vec![1, 2], vec![1.0, 2.0]).unwrap(), &clock)
        .unwrap();
    let out = acts.logits().data();
    assert!((out[0] - 0.36788).abs() < 1e-5);
    assert!((out[1] - 0.73576).abs() < 1e-5);
}

#[test]
fn zero_weight_head_gives_uniform_softmax_bias_gradient() {
    let arch = Architecture::mlp(&[1, 4, 4], &[6], 10).unwrap();
    let mut net = Network::<f32>::new(arch, &mut Rng::new(8));
    let head = net.arch().layers().len() - 1;
    net.params_mut()
        .get_mut(head, ParamKind::Weight)
        .unwrap()
        .value
        .fill(0.0);
    let labels = [3u8, 3, 7, 0];
    let mut batch = Tensor::zeros(vec![4, 1, 4, 4]);
    Rng::new(9).fill_uniform(batch.data_mut(), 0.0, 1.0);
    let loss = net.loss_and_grad(&batch, &labels, &ForgetClock::disabled()).unwrap();
    assert!((loss - 10f64.ln()).abs() < 1e-6);
    let grad = net.params().get(head, ParamKind::Bias).unwrap().grad.data().to_vec();
    for (c, g) in grad.iter().enumerate() {
        let hits = labels.iter().filter(|&&y| y as usize == c).count() as f64;
        let want = (4.0 * 0.1 - hits) / 4.0;
        assert!((*g as f64 - want).abs() < 1e-6, "class {c}: {g} vs {want}");
    }
}

#[test]
fn forget_gain_scales_gradients_of_upstream_parameters() {
    // A forget layer with tau = 1 at t = 1 multiplies the next layer's input
    // by 1/e. Folding that gain into the next layer's weights instead leaves
    // the logits unchanged, so the gradient reaching the first layer must be
    // the same; and relative to the plain network's upstream path, the forget
    // layer contributes exactly the factor 1/e.
    let arch = Architecture::mlp(&[1, 3, 3], &[5], 4).unwrap();
    let mut rng = Rng::new(10);
    let net = Network::<f64>::new(arch, &mut rng);
    let mut batch = Tensor::<f64>::zeros(vec![3, 1, 3, 3]);
    rng.fill_uniform(batch.data_mut(), -1.0, 1.0);
    let labels = [0u8, 2, 3];
    let gain = (-1.0f64).exp();

    let mut forgetting = net.clone();
    let clock = ForgetClock::new(1, vec![TauAssignment::new(0, vec![1.0; 5]).unwrap()]);
    forgetting.loss_and_grad(&batch, &labels, &clock).unwrap();

    let mut folded = net.without_forget();
    let head = folded.arch().layers().len() - 1;
    for v in folded.params_mut().get_mut(head, ParamKind::Weight).unwrap().value.data_mut() {
        *v *= gain;
    }
    folded.loss_and_grad(&batch, &labels, &ForgetClock::disabled()).unwrap();

    let first = |n: &Network<f64>, kind| n.params().get(1, kind).unwrap().grad.data().to_vec();
    for kind in [ParamKind::Weight, ParamKind::Bias] {
        for (a, b) in first(&forgetting, kind).iter().zip(first(&folded, kind)) {
            assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn forward_backward_sgd_are_deterministic() {
    let run = || {
        let mut net = Network::<f32>::new(Architecture::default_cnn(), &mut Rng::new(3));
        let mut batch = Tensor::zeros(vec![12, 28, 28]);
        Rng::new(4).fill_uniform(batch.data_mut(), 0.0, 1.0);
        let labels: Vec<u8> = (0..12).map(|i| (i % 10) as u8).collect();
        let clock = with_clock(&net, 2, &mut Rng::new(6));
        for _ in 0..3 {
            net.loss_and_grad(&batch, &labels, &clock).unwrap();
            net.params_mut().sgd_step(0.05);
        }
        net.params()
            .flatten()
            .into_iter()
            .map(f32::to_bits)
            .collect::<Vec<_>>()
    };
    assert_eq!(run(), run());
}

#[test]
fn batched_and_single_sample_losses_agree() {
    let net = Network::<f32>::new(Architecture::default_cnn(), &mut Rng::new(11));
    let mut batch = Tensor::zeros(vec![20, 28, 28]);
    Rng::new(12).fill_uniform(batch.data_mut(), 0.0, 1.0);
    let labels: Vec<u8> = (0..20).map(|i| (i * 7 % 10) as u8).collect();
    let clock = ForgetClock::disabled();
    let batched = per_sample_cross_entropy(net.forward(&batch, &clock).unwrap().logits(), &labels).unwrap();
    for i in 0..20 {
        let one = batch.select_rows(&[i]);
        let single =
            per_sample_cross_entropy(net.forward(&one, &clock).unwrap().logits(), &labels[i..=i]).unwrap();
        assert!((single[0] - batched[i]).abs() <= 1e-6 * batched[i].max(1.0));
    }
}

#[test]
fn shape_mismatch_names_layer_zero() {
    let net = Network::<f32>::new(Architecture::default_cnn(), &mut Rng::new(1));
    let err = net
        .forward(&Tensor::zeros(vec![2, 27, 28]), &ForgetClock::disabled())
        .unwrap_err();
    assert!(matches!(err, fnn_core::Error::Config { layer: 0, .. }), "{err}");
}
