//! Executable checks of the forgetting scaling laws, in 64-bit arithmetic.
//!
//! Scaling the incoming weights, bias and outgoing coefficient of a ReLU unit
//! by `phi` scales its contribution to the output by `phi^2`, because ReLU is
//! positively homogeneous. Stacking forgetting layers multiplies these
//! factors: a depth-`d` stack with gains `phi_k` scales the network output by
//! `prod_k phi_k^2`. The checks below evaluate both sides of those identities
//! on random networks, and include a sigmoid negative control for which the
//! identity must break.

use std::fmt;

use crate::error::{Error, Result};
use crate::forgetting::phi;
use crate::rng::Rng;

/// Denominator guard of the relative deviation.
pub const EPS: f64 = 1e-12;
/// Largest relative deviation accepted for the scaling identities.
pub const TOLERANCE: f64 = 1e-5;
/// Smallest deviation the sigmoid negative control must show.
pub const NEGATIVE_CONTROL_MIN: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    pub fn is_positively_homogeneous(self) -> bool {
        matches!(self, Activation::Relu)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn relative_deviation(scaled: f64, expected: f64) -> f64 {
    (scaled - expected).abs() / (expected.abs() + EPS)
}

fn require_homogeneous(activation: Activation) -> Result<()> {
    if activation.is_positively_homogeneous() {
        Ok(())
    } else {
        Err(Error::Unsupported(format!(
            "the scaling identity needs a positively homogeneous activation, got {activation}"
        )))
    }
}

/// `x -> sum_k a_k * act(<x, w_k> + b_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShallowNet {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub coeffs: Vec<f64>,
    pub activation: Activation,
}

impl ShallowNet {
    pub fn new(
        weights: Vec<Vec<f64>>,
        biases: Vec<f64>,
        coeffs: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        let units = weights.len();
        if units == 0 || biases.len() != units || coeffs.len() != units {
            return Err(Error::Shape(format!(
                "shallow net needs equal, non-zero unit counts (w {units}, b {}, a {})",
                biases.len(),
                coeffs.len()
            )));
        }
        let dim = weights[0].len();
        if weights.iter().any(|w| w.len() != dim) {
            return Err(Error::Shape("ragged weight rows".into()));
        }
        Ok(Self {
            weights,
            biases,
            coeffs,
            activation,
        })
    }

    pub fn random(rng: &mut Rng, units: usize, dim: usize, activation: Activation) -> Self {
        let weights = (0..units)
            .map(|_| (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect())
            .collect();
        let biases = (0..units).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let coeffs = (0..units).map(|_| rng.uniform(-1.0, 1.0)).collect();
        Self {
            weights,
            biases,
            coeffs,
            activation,
        }
    }

    pub fn units(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.weights[0].len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.weights
            .iter()
            .zip(&self.biases)
            .zip(&self.coeffs)
            .map(|((w, b), a)| a * self.activation.apply(dot(x, w) + b))
            .sum()
    }

    /// Every `a_k`, `w_k` and `b_k` multiplied by `gain`.
    pub fn scaled(&self, gain: f64) -> Self {
        Self {
            weights: self
                .weights
                .iter()
                .map(|w| w.iter().map(|v| v * gain).collect())
                .collect(),
            biases: self.biases.iter().map(|b| b * gain).collect(),
            coeffs: self.coeffs.iter().map(|a| a * gain).collect(),
            activation: self.activation,
        }
    }
}

/// Max over `inputs` of `|S_gain(x) - gain^2 S(x)| / (|gain^2 S(x)| + EPS)`,
/// for any activation.
pub fn shallow_scaling_deviation(net: &ShallowNet, inputs: &[Vec<f64>], gain: f64) -> f64 {
    let scaled = net.scaled(gain);
    inputs
        .iter()
        .map(|x| relative_deviation(scaled.eval(x), gain * gain * net.eval(x)))
        .fold(0.0, f64::max)
}

/// The shallow identity at decay time `t` with forgetting rate `tau`.
pub fn shallow_scaling_check(
    net: &ShallowNet,
    inputs: &[Vec<f64>],
    t: u32,
    tau: f64,
) -> Result<f64> {
    require_homogeneous(net.activation)?;
    Ok(shallow_scaling_deviation(net, inputs, phi(t, tau)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `outputs × inputs`.
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn apply(&self, x: &[f64], act: Activation) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(w, b)| act.apply(dot(x, w) + b))
            .collect()
    }

    fn scaled(&self, weight_gain: f64, bias_gain: f64) -> Self {
        Self {
            weights: self
                .weights
                .iter()
                .map(|w| w.iter().map(|v| v * weight_gain).collect())
                .collect(),
            bias: self.bias.iter().map(|b| b * bias_gain).collect(),
        }
    }
}

/// `d` hidden layers, each with its own forgetting rate, and a linear readout.
#[derive(Debug, Clone, PartialEq)]
pub struct ForgettingStack {
    pub layers: Vec<DenseLayer>,
    pub readout: Vec<f64>,
    pub taus: Vec<f64>,
    pub activation: Activation,
}

impl ForgettingStack {
    pub fn new(
        layers: Vec<DenseLayer>,
        readout: Vec<f64>,
        taus: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if layers.is_empty() || taus.len() != layers.len() {
            return Err(Error::Shape(format!(
                "stack needs d >= 1 layers and one tau per layer (d = {}, taus = {})",
                layers.len(),
                taus.len()
            )));
        }
        for pair in layers.windows(2) {
            if pair[1].weights.iter().any(|w| w.len() != pair[0].weights.len()) {
                return Err(Error::Shape("stack layers do not chain".into()));
            }
        }
        if readout.len() != layers.last().expect("non-empty").weights.len() {
            return Err(Error::Shape("readout width mismatch".into()));
        }
        Ok(Self {
            layers,
            readout,
            taus,
            activation,
        })
    }

    pub fn random(
        rng: &mut Rng,
        dim: usize,
        widths: &[usize],
        taus: Vec<f64>,
        activation: Activation,
    ) -> Self {
        let mut fan_in = dim;
        let mut layers = Vec::new();
        for &w in widths {
            layers.push(DenseLayer {
                weights: (0..w)
                    .map(|_| (0..fan_in).map(|_| rng.uniform(-1.0, 1.0)).collect())
                    .collect(),
                bias: (0..w).map(|_| rng.uniform(-1.0, 1.0)).collect(),
            });
            fan_in = w;
        }
        let readout = (0..fan_in).map(|_| rng.uniform(-1.0, 1.0)).collect();
        Self::new(layers, readout, taus, activation).expect("consistent random stack")
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let h = self
            .layers
            .iter()
            .fold(x.to_vec(), |h, l| l.apply(&h, self.activation));
        dot(&h, &self.readout)
    }

    /// The stack as it looks with forgetting gains `gains[k]` applied.
    ///
    /// Layer `k` has its incoming weights scaled by its own gain and by the
    /// outgoing gain of layer `k - 1`; its bias is scaled by its own gain and
    /// by the accumulated factor `prod_{j<k} gain_j^2` carried by its input.
    /// The readout carries the last layer's outgoing gain.
    pub fn scaled(&self, gains: &[f64]) -> Self {
        assert_eq!(gains.len(), self.depth());
        let mut carried = 1.0;
        let mut prev_gain = 1.0;
        let layers = self
            .layers
            .iter()
            .zip(gains)
            .map(|(l, &g)| {
                let scaled = l.scaled(g * prev_gain, g * carried);
                carried *= g * g;
                prev_gain = g;
                scaled
            })
            .collect();
        Self {
            layers,
            readout: self.readout.iter().map(|a| a * prev_gain).collect(),
            taus: self.taus.clone(),
            activation: self.activation,
        }
    }

    pub fn gains(&self, t: u32) -> Result<Vec<f64>> {
        self.taus.iter().map(|&tau| phi(t, tau)).collect()
    }
}

/// Max relative deviation between the scaled stack and `prod(gains^2)` times
/// the original, for any activation.
pub fn deep_scaling_deviation(stack: &ForgettingStack, inputs: &[Vec<f64>], gains: &[f64]) -> f64 {
    let scaled = stack.scaled(gains);
    let factor: f64 = gains.iter().map(|g| g * g).product();
    inputs
        .iter()
        .map(|x| relative_deviation(scaled.eval(x), factor * stack.eval(x)))
        .fold(0.0, f64::max)
}

/// The deep product law at decay time `t`.
pub fn deep_scaling_check(stack: &ForgettingStack, inputs: &[Vec<f64>], t: u32) -> Result<f64> {
    require_homogeneous(stack.activation)?;
    Ok(deep_scaling_deviation(stack, inputs, &stack.gains(t)?))
}

/// Whether arg-max of `logits` survives multiplying entry `i` by `gains[i]`.
pub fn argmax_preserved(logits: &[f64], gains: &[f64]) -> bool {
    let scaled: Vec<f64> = logits.iter().zip(gains).map(|(z, g)| z * g).collect();
    crate::nn::argmax(logits) == crate::nn::argmax(&scaled)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub trials: usize,
    pub max_deviation: f64,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub checks: Vec<CheckOutcome>,
}

impl TheoryReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Total number of random networks and stacks evaluated by the positive checks.
    pub fn networks_checked(&self) -> usize {
        self.checks
            .iter()
            .filter(|c| c.name.starts_with("shallow") || c.name.starts_with("deep"))
            .map(|c| c.trials)
            .sum()
    }
}

const INPUTS_PER_NET: usize = 100;

fn random_inputs(rng: &mut Rng, dim: usize, count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|_| (0..dim).map(|_| rng.uniform(-2.0, 2.0)).collect())
        .collect()
}

/// Runs the shallow law on `trials` random networks, the deep law on
/// `max(trials / 2, 1)` random stacks, the sigmoid negative control and the
/// arg-max differential.
///
/// `activation` is the activation assumed by the two positive checks; passing
/// [`Activation::Sigmoid`] forces them onto a non-homogeneous activation (so
/// they are expected to fail).
pub fn run_suite(trials: usize, seed: u64, activation: Activation) -> Result<TheoryReport> {
    if trials == 0 {
        return Err(Error::Argument("trials must be at least 1".into()));
    }
    let mut checks = Vec::new();

    let mut rng = Rng::derive(seed, &[1]);
    let mut worst = 0.0f64;
    for _ in 0..trials {
        let units = 1 + rng.below(32) as usize;
        let dim = 1 + rng.below(8) as usize;
        let net = ShallowNet::random(&mut rng, units, dim, activation);
        let inputs = random_inputs(&mut rng, dim, INPUTS_PER_NET);
        let t = 1 + rng.below(4) as u32;
        let tau = rng.uniform(0.5, 10.0);
        worst = worst.max(shallow_scaling_deviation(&net, &inputs, phi(t, tau)?));
    }
    checks.push(CheckOutcome {
        name: format!("shallow phi^2 law ({activation})"),
        trials,
        max_deviation: worst,
        threshold: TOLERANCE,
        passed: worst <= TOLERANCE,
    });

    let stacks = (trials / 2).max(1);
    let mut rng = Rng::derive(seed, &[2]);
    let mut worst = 0.0f64;
    for _ in 0..stacks {
        let depth = 1 + rng.below(4) as usize;
        let dim = 1 + rng.below(8) as usize;
        let widths: Vec<usize> = (0..depth).map(|_| 1 + rng.below(16) as usize).collect();
        let taus = (0..depth).map(|_| rng.uniform(0.5, 10.0)).collect();
        let stack = ForgettingStack::random(&mut rng, dim, &widths, taus, activation);
        let inputs = random_inputs(&mut rng, dim, INPUTS_PER_NET);
        let t = 1 + rng.below(4) as u32;
        worst = worst.max(deep_scaling_deviation(&stack, &inputs, &stack.gains(t)?));
    }
    checks.push(CheckOutcome {
        name: format!("deep product law ({activation})"),
        trials: stacks,
        max_deviation: worst,
        threshold: TOLERANCE,
        passed: worst <= TOLERANCE,
    });

    // Negative control: the identity must break for sigmoid.
    let mut rng = Rng::derive(seed, &[3]);
    let mut smallest = f64::INFINITY;
    let controls = (trials / 10).max(1);
    for _ in 0..controls {
        let units = 1 + rng.below(32) as usize;
        let dim = 1 + rng.below(8) as usize;
        let net = ShallowNet::random(&mut rng, units, dim, Activation::Sigmoid);
        let inputs = random_inputs(&mut rng, dim, INPUTS_PER_NET);
        let t = 1 + rng.below(4) as u32;
        let tau = rng.uniform(0.5, 10.0);
        smallest = smallest.min(shallow_scaling_deviation(&net, &inputs, phi(t, tau)?));
    }
    checks.push(CheckOutcome {
        name: "sigmoid negative control".into(),
        trials: controls,
        max_deviation: smallest,
        threshold: NEGATIVE_CONTROL_MIN,
        passed: smallest > NEGATIVE_CONTROL_MIN,
    });

    // A shared gain never moves the arg-max; per-neuron gains can.
    let mut rng = Rng::derive(seed, &[4]);
    let mut shared_ok = true;
    let mut varying_flips = 0usize;
    for _ in 0..trials {
        let logits: Vec<f64> = (0..10).map(|_| rng.uniform(-3.0, 3.0)).collect();
        let g = phi(1 + rng.below(4) as u32, rng.uniform(0.5, 10.0))?;
        shared_ok &= argmax_preserved(&logits, &[g; 10]);
        let varying: Vec<f64> = (0..10)
            .map(|_| phi(1 + rng.below(4) as u32, rng.uniform(0.5, 10.0)))
            .collect::<Result<_>>()?;
        if !argmax_preserved(&logits, &varying) {
            varying_flips += 1;
        }
    }
    checks.push(CheckOutcome {
        name: "argmax invariance (shared gain)".into(),
        trials,
        max_deviation: if shared_ok { 0.0 } else { 1.0 },
        threshold: 0.0,
        passed: shared_ok,
    });
    checks.push(CheckOutcome {
        name: "argmax flips (per-neuron gains)".into(),
        trials,
        max_deviation: varying_flips as f64,
        threshold: 1.0,
        passed: varying_flips >= 1,
    });

    Ok(TheoryReport { checks })
}
