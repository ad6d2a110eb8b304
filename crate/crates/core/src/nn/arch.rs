//! Layer descriptors and shape inference.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    /// Valid (unpadded) stride-1 convolution over `[channels, height, width]`.
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    /// 2×2 max pooling with stride 2; odd trailing rows/columns are dropped.
    MaxPool2,
    Relu,
    Flatten,
    Dense { inputs: usize, outputs: usize },
    /// Per-neuron multiplicative decay; identity while the clock reads `t = 0`.
    Forget,
}

impl LayerSpec {
    pub fn has_params(&self) -> bool {
        matches!(self, LayerSpec::Conv2d { .. } | LayerSpec::Dense { .. })
    }

    /// Weight and bias shapes of a parameterized layer.
    pub fn param_shapes(&self) -> Option<(Vec<usize>, Vec<usize>)> {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
            } => Some((
                vec![out_channels, in_channels, kernel, kernel],
                vec![out_channels],
            )),
            LayerSpec::Dense { inputs, outputs } => Some((vec![outputs, inputs], vec![outputs])),
            _ => None,
        }
    }

    pub fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Conv2d {
                in_channels, kernel, ..
            } => in_channels * kernel * kernel,
            LayerSpec::Dense { inputs, .. } => inputs,
            _ => 0,
        }
    }

    /// Per-sample output shape for a per-sample `input` shape.
    fn output_shape(&self, index: usize, input: &[usize]) -> Result<Vec<usize>> {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
            } => match *input {
                [c, h, w] if c == in_channels && h >= kernel && w >= kernel && kernel > 0 => {
                    Ok(vec![out_channels, h - kernel + 1, w - kernel + 1])
                }
                _ => Err(Error::config(
                    index,
                    format!(
                        "conv2d expects [{in_channels}, h>={kernel}, w>={kernel}], got {input:?}"
                    ),
                )),
            },
            LayerSpec::MaxPool2 => match *input {
                [c, h, w] if h >= 2 && w >= 2 => Ok(vec![c, h / 2, w / 2]),
                _ => Err(Error::config(
                    index,
                    format!("maxpool2 expects [c, h>=2, w>=2], got {input:?}"),
                )),
            },
            LayerSpec::Relu | LayerSpec::Forget => Ok(input.to_vec()),
            LayerSpec::Flatten => Ok(vec![input.iter().product()]),
            LayerSpec::Dense { inputs, outputs } => match *input {
                [n] if n == inputs => Ok(vec![outputs]),
                _ => Err(Error::config(
                    index,
                    format!("dense expects [{inputs}], got {input:?}"),
                )),
            },
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel,
            } => write!(f, "conv2d {in_channels} {out_channels} {kernel}"),
            LayerSpec::MaxPool2 => f.write_str("maxpool2"),
            LayerSpec::Relu => f.write_str("relu"),
            LayerSpec::Flatten => f.write_str("flatten"),
            LayerSpec::Dense { inputs, outputs } => write!(f, "dense {inputs} {outputs}"),
            LayerSpec::Forget => f.write_str("forget"),
        }
    }
}

/// An ordered layer list plus the per-sample input shape.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    input: Vec<usize>,
    layers: Vec<LayerSpec>,
}

impl Architecture {
    pub fn new(input: Vec<usize>, layers: Vec<LayerSpec>) -> Result<Self> {
        if input.is_empty() || input.iter().any(|&d| d == 0) {
            return Err(Error::config(0, format!("invalid input shape {input:?}")));
        }
        let arch = Self { input, layers };
        arch.shapes()?;
        Ok(arch)
    }

    /// The default image classifier: two conv/pool stages followed by
    /// dense 128 and dense 64 blocks, each ending in a forget layer, and a
    /// 10-way output.
    pub fn default_cnn() -> Self {
        Self::cnn(&[128, 64], 10)
    }

    pub fn cnn(hidden: &[usize], classes: usize) -> Self {
        let mut layers = vec![
            LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: 8,
                kernel: 3,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool2,
            LayerSpec::Conv2d {
                in_channels: 8,
                out_channels: 16,
                kernel: 3,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool2,
            LayerSpec::Flatten,
        ];
        push_head(&mut layers, 16 * 5 * 5, hidden, classes);
        Self::new(vec![1, 28, 28], layers).expect("default cnn chains")
    }

    /// Fully connected variant over a flattened `input` image.
    pub fn mlp(input: &[usize], hidden: &[usize], classes: usize) -> Result<Self> {
        let mut layers = vec![LayerSpec::Flatten];
        push_head(&mut layers, input.iter().product(), hidden, classes);
        Self::new(input.to_vec(), layers)
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input
    }

    pub fn input_volume(&self) -> usize {
        self.input.iter().product()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Per-sample output shape of every layer.
    pub fn shapes(&self) -> Result<Vec<Vec<usize>>> {
        let mut current = self.input.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            current = layer.output_shape(i, &current)?;
            out.push(current.clone());
        }
        Ok(out)
    }

    pub fn output_volume(&self) -> usize {
        self.shapes()
            .expect("validated at construction")
            .last()
            .map(|s| s.iter().product())
            .unwrap_or_else(|| self.input_volume())
    }

    /// Layer indices of the forget layers, in order; slot `k` is entry `k`.
    pub fn forget_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, LayerSpec::Forget))
            .map(|(i, _)| i)
            .collect()
    }

    /// Number of neurons gated by each forget slot.
    pub fn forget_widths(&self) -> Vec<usize> {
        let shapes = self.shapes().expect("validated at construction");
        self.forget_layers()
            .into_iter()
            .map(|i| shapes[i].iter().product())
            .collect()
    }

    /// The same architecture with every forget layer deleted.
    pub fn without_forget(&self) -> Self {
        Self {
            input: self.input.clone(),
            layers: self
                .layers
                .iter()
                .copied()
                .filter(|l| !matches!(l, LayerSpec::Forget))
                .collect(),
        }
    }

    /// Line-oriented text form stored in checkpoints.
    pub fn manifest(&self) -> String {
        let mut s = String::from("input");
        for d in &self.input {
            s.push_str(&format!(" {d}"));
        }
        s.push('\n');
        for l in &self.layers {
            s.push_str(&l.to_string());
            s.push('\n');
        }
        s
    }

    pub fn from_manifest(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let bad = |msg: String| Error::Format(format!("architecture manifest: {msg}"));
        let header = lines.next().ok_or_else(|| bad("empty".into()))?;
        let mut words = header.split_whitespace();
        if words.next() != Some("input") {
            return Err(bad(format!("expected input line, got {header:?}")));
        }
        let input = words
            .map(|w| w.parse::<usize>().map_err(|_| bad(format!("bad dimension {w:?}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut layers = Vec::new();
        for line in lines {
            let words: Vec<&str> = line.split_whitespace().collect();
            let num = |i: usize| -> Result<usize> {
                words
                    .get(i)
                    .and_then(|w| w.parse().ok())
                    .ok_or_else(|| bad(format!("bad layer line {line:?}")))
            };
            let layer = match words[0] {
                "conv2d" if words.len() == 4 => LayerSpec::Conv2d {
                    in_channels: num(1)?,
                    out_channels: num(2)?,
                    kernel: num(3)?,
                },
                "maxpool2" if words.len() == 1 => LayerSpec::MaxPool2,
                "relu" if words.len() == 1 => LayerSpec::Relu,
                "flatten" if words.len() == 1 => LayerSpec::Flatten,
                "dense" if words.len() == 3 => LayerSpec::Dense {
                    inputs: num(1)?,
                    outputs: num(2)?,
                },
                "forget" if words.len() == 1 => LayerSpec::Forget,
                _ => return Err(bad(format!("unknown layer line {line:?}"))),
            };
            layers.push(layer);
        }
        Self::new(input, layers).map_err(|e| bad(e.to_string()))
    }
}

fn push_head(layers: &mut Vec<LayerSpec>, mut width: usize, hidden: &[usize], classes: usize) {
    for &h in hidden {
        layers.push(LayerSpec::Dense {
            inputs: width,
            outputs: h,
        });
        layers.push(LayerSpec::Relu);
        layers.push(LayerSpec::Forget);
        width = h;
    }
    layers.push(LayerSpec::Dense {
        inputs: width,
        outputs: classes,
    });
}
