use serde::{Deserialize, Serialize};

use super::layers::{relu, relu_backward, BatchNorm, BnCache, BnMode, Dense};
use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense(Dense),
    BatchNorm(BatchNorm),
    Relu,
}

/// Forward-pass record for one layer.
#[derive(Debug, Clone)]
enum LayerTape {
    Dense(Matrix),
    BatchNorm(BnCache),
    Relu(Matrix),
}

/// Activations recorded by [`Network::forward_recorded`], consumed by
/// [`Network::backward`].
#[derive(Debug, Clone, Default)]
pub struct Tape {
    entries: Vec<LayerTape>,
}

impl Tape {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerGrad {
    Dense { weight: Matrix, bias: Vec<f64> },
    BatchNorm { gamma: Vec<f64>, beta: Vec<f64> },
    None,
}

/// Per-layer parameter gradients, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGrad>,
}

impl Gradients {
    /// Flat views in the same order as [`Network::params`].
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for g in &self.layers {
            match g {
                LayerGrad::Dense { weight, bias } => {
                    out.push(weight.as_slice());
                    out.push(bias.as_slice());
                }
                LayerGrad::BatchNorm { gamma, beta } => {
                    out.push(gamma.as_slice());
                    out.push(beta.as_slice());
                }
                LayerGrad::None => {}
            }
        }
        out
    }

    /// Elementwise accumulation of another gradient set of the same network.
    pub fn accumulate(&mut self, other: &Gradients) -> Result<()> {
        if self.layers.len() != other.layers.len() {
            return Err(Error::dim(
                "gradient accumulate",
                self.layers.len(),
                other.layers.len(),
            ));
        }
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            match (a, b) {
                (
                    LayerGrad::Dense { weight, bias },
                    LayerGrad::Dense {
                        weight: w2,
                        bias: b2,
                    },
                ) => {
                    weight.add_assign(w2)?;
                    bias.iter_mut().zip(b2).for_each(|(x, y)| *x += y);
                }
                (
                    LayerGrad::BatchNorm { gamma, beta },
                    LayerGrad::BatchNorm {
                        gamma: g2,
                        beta: b2,
                    },
                ) => {
                    gamma.iter_mut().zip(g2).for_each(|(x, y)| *x += y);
                    beta.iter_mut().zip(b2).for_each(|(x, y)| *x += y);
                }
                (LayerGrad::None, LayerGrad::None) => {}
                _ => {
                    return Err(Error::Usage(
                        "gradient sets come from different networks".into(),
                    ))
                }
            }
        }
        Ok(())
    }
}

/// Result of a backward pass.
#[derive(Debug, Clone)]
pub struct Backward {
    pub grads: Gradients,
    pub input_grad: Matrix,
}

/// A feed-forward stack of layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub layers: Vec<Layer>,
}

impl Network {
    pub fn new(layers: Vec<Layer>) -> Self {
        Network { layers }
    }

    pub fn in_dim(&self) -> Option<usize> {
        self.layers.iter().find_map(|l| match l {
            Layer::Dense(d) => Some(d.in_dim()),
            Layer::BatchNorm(b) => Some(b.dim()),
            Layer::Relu => None,
        })
    }

    pub fn out_dim(&self) -> Option<usize> {
        self.layers.iter().rev().find_map(|l| match l {
            Layer::Dense(d) => Some(d.out_dim()),
            Layer::BatchNorm(b) => Some(b.dim()),
            Layer::Relu => None,
        })
    }

    pub fn set_bn_mode(&mut self, mode: BnMode) {
        for bn in self.batch_norms_mut() {
            bn.mode = mode;
        }
    }

    pub fn batch_norms(&self) -> impl Iterator<Item = &BatchNorm> {
        self.layers.iter().filter_map(|l| match l {
            Layer::BatchNorm(b) => Some(b),
            _ => None,
        })
    }

    pub fn batch_norms_mut(&mut self) -> impl Iterator<Item = &mut BatchNorm> {
        self.layers.iter_mut().filter_map(|l| match l {
            Layer::BatchNorm(b) => Some(b),
            _ => None,
        })
    }

    pub fn dense_layers(&self) -> impl Iterator<Item = &Dense> {
        self.layers.iter().filter_map(|l| match l {
            Layer::Dense(d) => Some(d),
            _ => None,
        })
    }

    /// Forward pass without recording. Batch-norm layers may still update
    /// their running statistics, depending on their mode.
    pub fn forward(&mut self, input: &Matrix) -> Result<Matrix> {
        let mut x = input.clone();
        for layer in &mut self.layers {
            x = match layer {
                Layer::Dense(d) => d.forward(&x)?,
                Layer::BatchNorm(bn) => bn.forward(&x)?.0,
                Layer::Relu => relu(&x),
            };
        }
        Ok(x)
    }

    pub fn forward_recorded(&mut self, input: &Matrix) -> Result<(Matrix, Tape)> {
        let mut x = input.clone();
        let mut entries = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            x = match layer {
                Layer::Dense(d) => {
                    let y = d.forward(&x)?;
                    entries.push(LayerTape::Dense(x));
                    y
                }
                Layer::BatchNorm(bn) => {
                    let (y, cache) = bn.forward(&x)?;
                    entries.push(LayerTape::BatchNorm(cache));
                    y
                }
                Layer::Relu => {
                    let y = relu(&x);
                    entries.push(LayerTape::Relu(x));
                    y
                }
            };
        }
        Ok((x, Tape { entries }))
    }

    /// Exact gradients of a scalar loss given `dL/d(output)`.
    pub fn backward(&self, tape: &Tape, grad_out: &Matrix) -> Result<Backward> {
        if tape.entries.len() != self.layers.len() {
            return Err(Error::Usage(format!(
                "missing forward cache: tape has {} entries for {} layers",
                tape.entries.len(),
                self.layers.len()
            )));
        }
        let mut grad = grad_out.clone();
        let mut grads = Vec::with_capacity(self.layers.len());
        for (layer, entry) in self.layers.iter().zip(&tape.entries).rev() {
            match (layer, entry) {
                (Layer::Dense(d), LayerTape::Dense(input)) => {
                    let (weight, bias, g) = d.backward(input, &grad)?;
                    grads.push(LayerGrad::Dense { weight, bias });
                    grad = g;
                }
                (Layer::BatchNorm(bn), LayerTape::BatchNorm(cache)) => {
                    let (gamma, beta, g) = bn.backward(cache, &grad)?;
                    grads.push(LayerGrad::BatchNorm { gamma, beta });
                    grad = g;
                }
                (Layer::Relu, LayerTape::Relu(input)) => {
                    grad = relu_backward(input, &grad)?;
                    grads.push(LayerGrad::None);
                }
                _ => {
                    return Err(Error::Usage(
                        "tape was recorded on a different network".into(),
                    ))
                }
            }
        }
        grads.reverse();
        Ok(Backward {
            grads: Gradients { layers: grads },
            input_grad: grad,
        })
    }

    /// Trainable parameters as flat slices: for each dense layer its weight
    /// then bias, for each batch-norm layer its scale then shift.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            match l {
                Layer::Dense(d) => {
                    out.push(d.weight.as_slice());
                    out.push(d.bias.as_slice());
                }
                Layer::BatchNorm(b) => {
                    out.push(b.gamma.as_slice());
                    out.push(b.beta.as_slice());
                }
                Layer::Relu => {}
            }
        }
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            match l {
                Layer::Dense(d) => {
                    out.push(d.weight.as_mut_slice());
                    out.push(d.bias.as_mut_slice());
                }
                Layer::BatchNorm(b) => {
                    out.push(b.gamma.as_mut_slice());
                    out.push(b.beta.as_mut_slice());
                }
                Layer::Relu => {}
            }
        }
        out
    }

    /// Checks that consecutive layer widths chain and every vector has its
    /// layer's width. The error names the offending layer as `layers[i].field`.
    pub fn validate(&self) -> std::result::Result<(), (String, String)> {
        let mut width: Option<usize> = None;
        for (i, l) in self.layers.iter().enumerate() {
            let at = |f: &str| format!("layers[{i}].{f}");
            let (in_dim, out_dim) = match l {
                Layer::Dense(d) => {
                    if d.bias.len() != d.out_dim() {
                        return Err((
                            at("bias"),
                            format!(
                                "length {} but weight has {} columns",
                                d.bias.len(),
                                d.out_dim()
                            ),
                        ));
                    }
                    if !d.bias.iter().all(|v| v.is_finite()) {
                        return Err((at("bias"), "non-finite value".into()));
                    }
                    (d.in_dim(), d.out_dim())
                }
                Layer::BatchNorm(b) => {
                    let n = b.dim();
                    for (name, v) in [
                        ("beta", &b.beta),
                        ("running_mean", &b.running_mean),
                        ("running_var", &b.running_var),
                    ] {
                        if v.len() != n {
                            return Err((
                                at(name),
                                format!("length {} but gamma has length {n}", v.len()),
                            ));
                        }
                    }
                    let vectors = [&b.gamma, &b.beta, &b.running_mean, &b.running_var];
                    if !vectors.iter().all(|v| v.iter().all(|x| x.is_finite())) {
                        return Err((at("gamma"), "non-finite batch-norm value".into()));
                    }
                    if b.running_var.iter().any(|&v| v < 0.0) {
                        return Err((at("running_var"), "negative variance".into()));
                    }
                    if !(b.eps > 0.0) {
                        return Err((at("eps"), "must be positive".into()));
                    }
                    if !(b.momentum > 0.0 && b.momentum <= 1.0) {
                        return Err((at("momentum"), "must lie in (0, 1]".into()));
                    }
                    (n, n)
                }
                Layer::Relu => continue,
            };
            if let Some(w) = width {
                if w != in_dim {
                    return Err((
                        at("input"),
                        format!("expects width {in_dim} but previous layer outputs {w}"),
                    ));
                }
            }
            width = Some(out_dim);
        }
        if width.is_none() {
            return Err(("layers".into(), "network has no parameterized layer".into()));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Stable 64-bit fingerprint of every parameter and running statistic.
    pub fn checksum(&self) -> u64 {
        let mut h = Fnv::new();
        for l in &self.layers {
            match l {
                Layer::Dense(d) => {
                    h.write_f64s(d.weight.as_slice());
                    h.write_f64s(&d.bias);
                }
                Layer::BatchNorm(b) => {
                    h.write_f64s(&b.gamma);
                    h.write_f64s(&b.beta);
                    h.write_f64s(&b.running_mean);
                    h.write_f64s(&b.running_var);
                }
                Layer::Relu => h.write_u64(0x5e1),
            }
        }
        h.finish()
    }
}

/// FNV-1a over raw bit patterns.
pub(crate) struct Fnv(u64);

impl Fnv {
    pub(crate) fn new() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }

    pub(crate) fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    pub(crate) fn write_f64s(&mut self, vs: &[f64]) {
        self.write_u64(vs.len() as u64);
        for v in vs {
            self.write_u64(v.to_bits());
        }
    }

    pub(crate) fn finish(&self) -> u64 {
        self.0
    }
}
