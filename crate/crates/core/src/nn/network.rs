use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layer::{BatchNorm, Dense, Layer, LayerSpec, LeakyRelu};
use super::matrix::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running statistics are updated.
    Train,
    /// Running statistics; the network is not modified.
    Eval,
}

/// Parameter gradients, one array per parameter block in
/// [`DenseNetwork::parameters`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn is_zero(&self) -> bool {
        self.0.iter().flatten().all(|&g| g == 0.0)
    }
}

#[derive(Debug, Clone)]
enum TapeEntry {
    Dense { input: Matrix },
    BatchNorm { x_hat: Matrix, inv_std: Vec<f64> },
    LeakyRelu { input: Matrix },
}

/// Intermediates retained by a forward pass for the matching backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    generation: u64,
    mode: Mode,
    specs: Vec<LayerSpec>,
    entries: Vec<TapeEntry>,
    output_shape: (usize, usize),
}

/// A chain of dense, batch-norm and leaky-ReLU layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNetwork {
    layers: Vec<Layer>,
    /// Bumped on every parameter mutation so stale tapes can be detected.
    #[serde(skip)]
    generation: u64,
}

impl DenseNetwork {
    /// Builds and initializes a network from layer descriptors.
    pub fn new(specs: &[LayerSpec], rng: &mut impl Rng) -> Result<Self> {
        let layers = specs
            .iter()
            .map(|spec| match *spec {
                LayerSpec::Dense { input, output, bias } => {
                    Layer::Dense(Dense::init(input, output, bias, rng))
                }
                LayerSpec::BatchNorm { dim, affine } => Layer::BatchNorm(BatchNorm::new(dim, affine)),
                LayerSpec::LeakyRelu { slope } => Layer::LeakyRelu(LeakyRelu { slope }),
            })
            .collect();
        Self::from_layers(layers)
    }

    /// Wraps explicit layers after checking that their widths chain.
    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        let mut width: Option<usize> = None;
        for layer in &layers {
            if let (Some(w), Some(input)) = (width, layer.input_dim()) {
                if w != input {
                    return Err(Error::DimensionMismatch {
                        expected: w,
                        got: input,
                    });
                }
            }
            if let Some(out) = layer.output_dim() {
                width = Some(out);
            }
            if let Layer::Dense(d) = layer {
                if d.weight.len() != d.input * d.output {
                    return Err(Error::LengthMismatch {
                        expected: d.input * d.output,
                        got: d.weight.len(),
                    });
                }
            }
        }
        if width.is_none() {
            return Err(Error::InvalidConfig(
                "network needs at least one dense or batch-norm layer".into(),
            ));
        }
        Ok(DenseNetwork {
            layers,
            generation: 0,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers.iter().find_map(Layer::input_dim).unwrap_or(0)
    }

    pub fn output_dim(&self) -> usize {
        self.layers.iter().rev().find_map(Layer::output_dim).unwrap_or(0)
    }

    fn needs_batch_stats(&self) -> bool {
        self.layers.iter().any(|l| matches!(l, Layer::BatchNorm(_)))
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.cols(),
            });
        }
        if x.rows() == 0 {
            return Err(Error::EmptySample);
        }
        Ok(())
    }

    pub fn forward(&mut self, x: &Matrix, mode: Mode) -> Result<(Matrix, Tape)> {
        self.check_input(x)?;
        if mode == Mode::Train && x.rows() < 2 && self.needs_batch_stats() {
            return Err(Error::BatchTooSmall);
        }
        let mut entries = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = match layer {
                Layer::Dense(d) => {
                    let out = d.forward(&h);
                    entries.push(TapeEntry::Dense { input: h });
                    out
                }
                Layer::BatchNorm(bn) => match mode {
                    Mode::Train => {
                        let (out, x_hat, inv_std) = bn.forward_train(&h);
                        entries.push(TapeEntry::BatchNorm { x_hat, inv_std });
                        out
                    }
                    Mode::Eval => {
                        let out = bn.forward_eval(&h);
                        entries.push(TapeEntry::BatchNorm {
                            x_hat: Matrix::zeros(0, 0),
                            inv_std: Vec::new(),
                        });
                        out
                    }
                },
                Layer::LeakyRelu(act) => {
                    let out = act.forward(&h);
                    entries.push(TapeEntry::LeakyRelu { input: h });
                    out
                }
            };
        }
        let tape = Tape {
            generation: self.generation,
            mode,
            specs: self.specs(),
            entries,
            output_shape: (h.rows(), h.cols()),
        };
        Ok((h, tape))
    }

    /// Eval-mode forward pass that leaves the network untouched.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut h = x.clone();
        for layer in &self.layers {
            h = match layer {
                Layer::Dense(d) => d.forward(&h),
                Layer::BatchNorm(bn) => bn.forward_eval(&h),
                Layer::LeakyRelu(act) => act.forward(&h),
            };
        }
        Ok(h)
    }

    /// Backpropagates `output_gradient` through a train-mode tape.
    ///
    /// Returns the parameter gradients and the gradient with respect to the
    /// network input.
    pub fn backward(&self, tape: &Tape, output_gradient: &Matrix) -> Result<(Gradients, Matrix)> {
        if tape.mode != Mode::Train {
            return Err(Error::StaleTape("tape was recorded in eval mode"));
        }
        if tape.generation != self.generation {
            return Err(Error::StaleTape("parameters changed since the forward pass"));
        }
        if tape.specs != self.specs() || tape.entries.len() != self.layers.len() {
            return Err(Error::StaleTape("tape belongs to a different network"));
        }
        if (output_gradient.rows(), output_gradient.cols()) != tape.output_shape {
            return Err(Error::DimensionMismatch {
                expected: tape.output_shape.1,
                got: output_gradient.cols(),
            });
        }

        let mut blocks: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.layers.len());
        let mut grad = output_gradient.clone();
        for (layer, entry) in self.layers.iter().zip(&tape.entries).rev() {
            let mut layer_blocks = Vec::new();
            grad = match (layer, entry) {
                (Layer::Dense(d), TapeEntry::Dense { input }) => {
                    let (dw, db, dx) = d.backward(input, &grad);
                    layer_blocks.push(dw);
                    layer_blocks.extend(db);
                    dx
                }
                (Layer::BatchNorm(bn), TapeEntry::BatchNorm { x_hat, inv_std }) => {
                    let (dg, db, dx) = bn.backward(x_hat, inv_std, &grad);
                    layer_blocks.extend(dg);
                    layer_blocks.extend(db);
                    dx
                }
                (Layer::LeakyRelu(act), TapeEntry::LeakyRelu { input }) => act.backward(input, &grad),
                _ => return Err(Error::StaleTape("layer kinds do not match")),
            };
            blocks.push(layer_blocks);
        }
        blocks.reverse();
        Ok((Gradients(blocks.into_iter().flatten().collect()), grad))
    }

    /// Parameter blocks in a fixed order: per layer, dense weight then bias,
    /// batch-norm scale then shift.
    pub fn parameters(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Dense(d) => {
                    out.push(&d.weight);
                    if let Some(b) = &d.bias {
                        out.push(b);
                    }
                }
                Layer::BatchNorm(bn) => {
                    if let (Some(g), Some(b)) = (&bn.gamma, &bn.beta) {
                        out.push(g);
                        out.push(b);
                    }
                }
                Layer::LeakyRelu(_) => {}
            }
        }
        out
    }

    /// Mutable parameter blocks; invalidates outstanding tapes.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.generation += 1;
        let mut out: Vec<&mut [f64]> = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Dense(d) => {
                    out.push(&mut d.weight);
                    if let Some(b) = &mut d.bias {
                        out.push(b);
                    }
                }
                Layer::BatchNorm(bn) => {
                    if let (Some(g), Some(b)) = (&mut bn.gamma, &mut bn.beta) {
                        out.push(g);
                        out.push(b);
                    }
                }
                Layer::LeakyRelu(_) => {}
            }
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    /// Number of additive offset parameters (dense biases and batch-norm
    /// shifts).
    pub fn bias_parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Dense(d) => d.bias.as_ref().map_or(0, Vec::len),
                Layer::BatchNorm(bn) => bn.beta.as_ref().map_or(0, Vec::len),
                Layer::LeakyRelu(_) => 0,
            })
            .sum()
    }

    pub fn all_finite(&self) -> bool {
        self.parameters().iter().all(|p| p.iter().all(|v| v.is_finite()))
    }
}
