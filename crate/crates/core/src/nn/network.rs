use crate::error::{Error, Result};
use crate::forgetting::ForgetClock;
use crate::nn::arch::{Architecture, LayerSpec};
use crate::nn::layers::{self, ConvGeom};
use crate::nn::loss::softmax_cross_entropy;
use crate::rng::Rng;
use crate::tensor::{Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Weight,
    Bias,
}

/// One trainable tensor and its gradient buffer (always the same shape).
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T: Scalar = f32> {
    pub layer: usize,
    pub kind: ParamKind,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

/// All parameters of a network, in layer order (weight before bias).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<T: Scalar = f32> {
    entries: Vec<Param<T>>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn entries(&self) -> &[Param<T>] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Param<T>] {
        &mut self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.entries.iter().map(|p| p.value.len()).sum()
    }

    pub fn get(&self, layer: usize, kind: ParamKind) -> Option<&Param<T>> {
        self.entries
            .iter()
            .find(|p| p.layer == layer && p.kind == kind)
    }

    pub fn get_mut(&mut self, layer: usize, kind: ParamKind) -> Option<&mut Param<T>> {
        self.entries
            .iter_mut()
            .find(|p| p.layer == layer && p.kind == kind)
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.entries {
            p.grad.fill(T::zero());
        }
    }

    /// Plain gradient descent on every entry: `p -= lr * g`.
    pub fn sgd_step(&mut self, lr: f64) {
        let lr = T::from_real(lr);
        for p in &mut self.entries {
            crate::nn::sgd_step(p.value.data_mut(), p.grad.data(), lr);
        }
    }

    /// Flat copy of all parameter values in layer order.
    pub fn flatten(&self) -> Vec<T> {
        self.entries
            .iter()
            .flat_map(|p| p.value.data().iter().copied())
            .collect()
    }

    pub fn flatten_grads(&self) -> Vec<T> {
        self.entries
            .iter()
            .flat_map(|p| p.grad.data().iter().copied())
            .collect()
    }
}

/// Everything produced by one forward pass, as needed by [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Activations<T: Scalar = f32> {
    input: Tensor<T>,
    outputs: Vec<Tensor<T>>,
    /// Gains applied by each forget layer (`None` when it was an identity).
    gains: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> Activations<T> {
    pub fn input(&self) -> &Tensor<T> {
        &self.input
    }

    /// Output of layer `index`, with the batch as leading dimension.
    pub fn output(&self, index: usize) -> &Tensor<T> {
        &self.outputs[index]
    }

    pub fn logits(&self) -> &Tensor<T> {
        self.outputs.last().unwrap_or(&self.input)
    }

    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }
}

/// A feed-forward classifier built from an [`Architecture`].
#[derive(Debug, Clone, PartialEq)]
pub struct Network<T: Scalar = f32> {
    arch: Architecture,
    shapes: Vec<Vec<usize>>,
    params: ParamSet<T>,
}

impl<T: Scalar> Network<T> {
    /// He-uniform weights (`U(-sqrt(6/fan_in), sqrt(6/fan_in))`), zero biases.
    pub fn new(arch: Architecture, rng: &mut Rng) -> Self {
        let mut net = Self::zeros(arch);
        for p in &mut net.params.entries {
            if p.kind == ParamKind::Weight {
                let fan_in = net.arch.layers()[p.layer].fan_in();
                let limit = (6.0 / fan_in as f64).sqrt();
                rng.fill_uniform(p.value.data_mut(), -limit, limit);
            }
        }
        net
    }

    pub fn zeros(arch: Architecture) -> Self {
        let shapes = arch.shapes().expect("architectures are validated at construction");
        let mut entries = Vec::new();
        for (i, layer) in arch.layers().iter().enumerate() {
            if let Some((w, b)) = layer.param_shapes() {
                for (kind, shape) in [(ParamKind::Weight, w), (ParamKind::Bias, b)] {
                    entries.push(Param {
                        layer: i,
                        kind,
                        value: Tensor::zeros(shape.clone()),
                        grad: Tensor::zeros(shape),
                    });
                }
            }
        }
        Self {
            arch,
            shapes,
            params: ParamSet { entries },
        }
    }

    /// Builds a network from explicit parameter values in layer order.
    pub fn from_values(arch: Architecture, values: Vec<Vec<T>>) -> Result<Self> {
        let mut net = Self::zeros(arch);
        if values.len() != net.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, got {}",
                net.params.len(),
                values.len()
            )));
        }
        for (p, v) in net.params.entries.iter_mut().zip(values) {
            p.value = Tensor::new(p.value.shape().to_vec(), v)?;
        }
        Ok(net)
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    pub fn classes(&self) -> usize {
        self.arch.output_volume()
    }

    /// Per-sample output shape of layer `index`.
    pub fn layer_shape(&self, index: usize) -> &[usize] {
        &self.shapes[index]
    }

    /// Same parameters with every forget layer removed.
    pub fn without_forget(&self) -> Self {
        let arch = self.arch.without_forget();
        let values = self
            .params
            .entries
            .iter()
            .map(|p| p.value.data().to_vec())
            .collect();
        Self::from_values(arch, values).expect("parameter layout is unchanged")
    }

    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let values = self
            .params
            .entries
            .iter()
            .map(|p| p.value.cast::<U>().into_data())
            .collect();
        Network::from_values(self.arch.clone(), values).expect("same architecture")
    }

    fn weight_bias(&self, layer: usize) -> (&[T], &[T]) {
        let w = self.params.get(layer, ParamKind::Weight).expect("weight");
        let b = self.params.get(layer, ParamKind::Bias).expect("bias");
        (w.value.data(), b.value.data())
    }

    fn input_shape_of(&self, layer: usize) -> &[usize] {
        if layer == 0 {
            self.arch.input_shape()
        } else {
            &self.shapes[layer - 1]
        }
    }

    pub fn forward(&self, batch: &Tensor<T>, clock: &ForgetClock) -> Result<Activations<T>> {
        let n = batch.rows();
        if batch.shape().len() < 2 || batch.row_len() != self.arch.input_volume() {
            return Err(Error::config(
                0,
                format!(
                    "batch shape {:?} does not match input shape {:?}",
                    batch.shape(),
                    self.arch.input_shape()
                ),
            ));
        }
        let mut outputs: Vec<Tensor<T>> = Vec::with_capacity(self.arch.layers().len());
        let mut gains = Vec::with_capacity(self.arch.layers().len());
        let mut slot = 0;
        for (i, layer) in self.arch.layers().iter().enumerate() {
            let x = outputs.last().unwrap_or(batch).data();
            let mut gain = None;
            let y = match *layer {
                LayerSpec::Dense { inputs, outputs } => {
                    let (w, b) = self.weight_bias(i);
                    layers::dense_forward(x, n, w, b, inputs, outputs)
                }
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    ..
                } => {
                    let (w, b) = self.weight_bias(i);
                    let geom = conv_geom(self.input_shape_of(i), out_channels, kernel);
                    layers::conv_forward(x, n, &geom, w, b)
                }
                LayerSpec::MaxPool2 => {
                    layers::maxpool_forward(x, n, shape3(self.input_shape_of(i)))
                }
                LayerSpec::Relu => layers::relu_forward(x),
                LayerSpec::Flatten => x.to_vec(),
                LayerSpec::Forget => {
                    let width = self.shapes[i].iter().product();
                    let g = clock
                        .gains(slot, width)
                        .map_err(|e| Error::config(i, e.to_string()))?;
                    slot += 1;
                    match g {
                        None => x.to_vec(),
                        Some(g) => {
                            let g: Vec<T> = g.into_iter().map(T::from_real).collect();
                            let y = layers::scale_rows(x, &g);
                            gain = Some(g);
                            y
                        }
                    }
                }
            };
            let mut shape = vec![n];
            shape.extend_from_slice(&self.shapes[i]);
            outputs.push(Tensor::new(shape, y).map_err(|e| Error::config(i, e.to_string()))?);
            gains.push(gain);
        }
        let mut input_shape = vec![n];
        input_shape.extend_from_slice(self.arch.input_shape());
        Ok(Activations {
            input: batch.clone().reshape(input_shape)?,
            outputs,
            gains,
        })
    }

    /// Fills the gradient buffers with the gradient of the mean cross-entropy
    /// of `acts` against `labels`; returns that loss.
    pub fn backward(&mut self, acts: &Activations<T>, labels: &[u8]) -> Result<f64> {
        if acts.outputs.len() != self.arch.layers().len() {
            return Err(Error::Argument(
                "activations were not produced by this network".into(),
            ));
        }
        let (loss, dlogits) = softmax_cross_entropy(acts.logits(), labels)?;
        let n = acts.batch_size();
        let mut dy = dlogits.into_data();
        for i in (0..self.arch.layers().len()).rev() {
            let x = if i == 0 {
                acts.input.data()
            } else {
                acts.outputs[i - 1].data()
            };
            let need_dx = i > 0;
            let dx = match self.arch.layers()[i] {
                LayerSpec::Dense { inputs, outputs } => {
                    let (dw, db, w) = self.grad_buffers(i);
                    layers::dense_backward(x, &dy, &w, n, inputs, outputs, dw, db, need_dx)
                }
                LayerSpec::Conv2d {
                    out_channels,
                    kernel,
                    ..
                } => {
                    let geom = conv_geom(self.input_shape_of(i), out_channels, kernel);
                    let (dw, db, w) = self.grad_buffers(i);
                    layers::conv_backward(x, &dy, n, &geom, &w, dw, db, need_dx)
                }
                LayerSpec::MaxPool2 => Some(layers::maxpool_backward(
                    x,
                    &dy,
                    n,
                    shape3(self.input_shape_of(i)),
                )),
                LayerSpec::Relu => Some(layers::relu_backward(acts.outputs[i].data(), &dy)),
                LayerSpec::Flatten => Some(dy.clone()),
                LayerSpec::Forget => Some(match &acts.gains[i] {
                    None => dy.clone(),
                    Some(g) => layers::scale_rows(&dy, g),
                }),
            };
            match dx {
                Some(dx) => dy = dx,
                None => break,
            }
        }
        Ok(loss)
    }

    /// Forward and backward on one batch; returns the mean loss.
    pub fn loss_and_grad(
        &mut self,
        batch: &Tensor<T>,
        labels: &[u8],
        clock: &ForgetClock,
    ) -> Result<f64> {
        let acts = self.forward(batch, clock)?;
        self.backward(&acts, labels)
    }

    fn grad_buffers(&mut self, layer: usize) -> (&mut [T], &mut [T], Vec<T>) {
        let wi = self
            .params
            .entries
            .iter()
            .position(|p| p.layer == layer && p.kind == ParamKind::Weight)
            .expect("weight");
        let (head, tail) = self.params.entries.split_at_mut(wi + 1);
        let w = &mut head[wi];
        let weights = w.value.data().to_vec();
        (w.grad.data_mut(), tail[0].grad.data_mut(), weights)
    }
}

fn shape3(s: &[usize]) -> [usize; 3] {
    [s[0], s[1], s[2]]
}

fn conv_geom(input: &[usize], out_channels: usize, kernel: usize) -> ConvGeom {
    ConvGeom {
        channels: input[0],
        height: input[1],
        width: input[2],
        out_channels,
        kernel,
    }
}
