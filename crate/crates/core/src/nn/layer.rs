use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;
pub const BATCH_NORM_MOMENTUM: f64 = 0.9;
pub const BATCH_NORM_EPS: f64 = 1e-5;

/// Shape-only description of a layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        input: usize,
        output: usize,
        bias: bool,
    },
    /// `affine: false` drops the learnable scale and shift.
    BatchNorm { dim: usize, affine: bool },
    LeakyRelu { slope: f64 },
}

/// `y = x W^T + b`, with `W` stored as `output x input`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub input: usize,
    pub output: usize,
    pub weight: Vec<f64>,
    pub bias: Option<Vec<f64>>,
}

impl Dense {
    /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero bias.
    pub fn init(input: usize, output: usize, bias: bool, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (input as f64).sqrt();
        let weight = (0..input * output)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        Dense {
            input,
            output,
            weight,
            bias: bias.then(|| vec![0.0; output]),
        }
    }

    pub(crate) fn forward(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), self.output);
        for r in 0..x.rows() {
            let xr = x.row(r);
            let yr = out.row_mut(r);
            for (o, y) in yr.iter_mut().enumerate() {
                let w = &self.weight[o * self.input..(o + 1) * self.input];
                let mut acc = self.bias.as_ref().map_or(0.0, |b| b[o]);
                for (wi, xi) in w.iter().zip(xr) {
                    acc += wi * xi;
                }
                *y = acc;
            }
        }
        out
    }

    /// Returns `(dW, db, dX)`.
    pub(crate) fn backward(&self, x: &Matrix, dy: &Matrix) -> (Vec<f64>, Option<Vec<f64>>, Matrix) {
        let mut dw = vec![0.0; self.weight.len()];
        let mut db = self.bias.as_ref().map(|_| vec![0.0; self.output]);
        let mut dx = Matrix::zeros(x.rows(), self.input);
        for r in 0..x.rows() {
            let xr = x.row(r);
            let dyr = dy.row(r);
            let dxr = dx.row_mut(r);
            for (o, &g) in dyr.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let w = &self.weight[o * self.input..(o + 1) * self.input];
                let dwo = &mut dw[o * self.input..(o + 1) * self.input];
                for i in 0..self.input {
                    dwo[i] += g * xr[i];
                    dxr[i] += g * w[i];
                }
            }
            if let Some(db) = db.as_mut() {
                for (b, g) in db.iter_mut().zip(dyr) {
                    *b += g;
                }
            }
        }
        (dw, db, dx)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub dim: usize,
    pub gamma: Option<Vec<f64>>,
    pub beta: Option<Vec<f64>>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    /// Fraction of the running statistic kept at each update.
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(dim: usize, affine: bool) -> Self {
        BatchNorm {
            dim,
            gamma: affine.then(|| vec![1.0; dim]),
            beta: affine.then(|| vec![0.0; dim]),
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: BATCH_NORM_MOMENTUM,
            eps: BATCH_NORM_EPS,
        }
    }

    fn affine(&self, x_hat: &Matrix) -> Matrix {
        let mut out = x_hat.clone();
        if let (Some(g), Some(b)) = (&self.gamma, &self.beta) {
            for r in 0..out.rows() {
                for ((y, gi), bi) in out.row_mut(r).iter_mut().zip(g).zip(b) {
                    *y = *y * gi + bi;
                }
            }
        }
        out
    }

    /// Normalizes with batch statistics and updates the running estimates.
    /// Returns `(output, x_hat, inv_std)`.
    pub(crate) fn forward_train(&mut self, x: &Matrix) -> (Matrix, Matrix, Vec<f64>) {
        let n = x.rows() as f64;
        let mean = x.column_means();
        let mut var = vec![0.0; self.dim];
        for r in x.iter_rows() {
            for ((v, xi), m) in var.iter_mut().zip(r).zip(&mean) {
                *v += (xi - m) * (xi - m);
            }
        }
        var.iter_mut().for_each(|v| *v /= n);
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();

        let mut x_hat = x.clone();
        for r in 0..x_hat.rows() {
            for ((xi, m), s) in x_hat.row_mut(r).iter_mut().zip(&mean).zip(&inv_std) {
                *xi = (*xi - m) * s;
            }
        }

        let unbias = n / (n - 1.0);
        for j in 0..self.dim {
            self.running_mean[j] = self.momentum * self.running_mean[j] + (1.0 - self.momentum) * mean[j];
            self.running_var[j] =
                self.momentum * self.running_var[j] + (1.0 - self.momentum) * var[j] * unbias;
        }

        (self.affine(&x_hat), x_hat, inv_std)
    }

    pub(crate) fn forward_eval(&self, x: &Matrix) -> Matrix {
        let mut x_hat = x.clone();
        for r in 0..x_hat.rows() {
            for (j, xi) in x_hat.row_mut(r).iter_mut().enumerate() {
                *xi = (*xi - self.running_mean[j]) / (self.running_var[j] + self.eps).sqrt();
            }
        }
        self.affine(&x_hat)
    }

    /// Returns `(dgamma, dbeta, dX)`.
    pub(crate) fn backward(
        &self,
        x_hat: &Matrix,
        inv_std: &[f64],
        dy: &Matrix,
    ) -> (Option<Vec<f64>>, Option<Vec<f64>>, Matrix) {
        let n = dy.rows() as f64;
        let mut dgamma = self.gamma.as_ref().map(|_| vec![0.0; self.dim]);
        let mut dbeta = self.beta.as_ref().map(|_| vec![0.0; self.dim]);
        if let (Some(dg), Some(db)) = (dgamma.as_mut(), dbeta.as_mut()) {
            for (dyr, xr) in dy.iter_rows().zip(x_hat.iter_rows()) {
                for j in 0..self.dim {
                    dg[j] += dyr[j] * xr[j];
                    db[j] += dyr[j];
                }
            }
        }

        let mut dx_hat = dy.clone();
        if let Some(g) = &self.gamma {
            for r in 0..dx_hat.rows() {
                for (d, gi) in dx_hat.row_mut(r).iter_mut().zip(g) {
                    *d *= gi;
                }
            }
        }
        let mut sum_d = vec![0.0; self.dim];
        let mut sum_dx = vec![0.0; self.dim];
        for (dr, xr) in dx_hat.iter_rows().zip(x_hat.iter_rows()) {
            for j in 0..self.dim {
                sum_d[j] += dr[j];
                sum_dx[j] += dr[j] * xr[j];
            }
        }
        let mut dx = Matrix::zeros(dy.rows(), self.dim);
        for r in 0..dx.rows() {
            let dr = dx_hat.row(r);
            let xr = x_hat.row(r);
            for (j, out) in dx.row_mut(r).iter_mut().enumerate() {
                *out = inv_std[j] / n * (n * dr[j] - sum_d[j] - xr[j] * sum_dx[j]);
            }
        }
        (dgamma, dbeta, dx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakyRelu {
    pub slope: f64,
}

impl LeakyRelu {
    pub(crate) fn forward(&self, x: &Matrix) -> Matrix {
        let mut out = x.clone();
        out.as_mut_slice()
            .iter_mut()
            .for_each(|v| if *v < 0.0 { *v *= self.slope });
        out
    }

    pub(crate) fn backward(&self, x: &Matrix, dy: &Matrix) -> Matrix {
        let mut dx = dy.clone();
        for (d, &xi) in dx.as_mut_slice().iter_mut().zip(x.as_slice()) {
            if xi < 0.0 {
                *d *= self.slope;
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Layer {
    Dense(Dense),
    BatchNorm(BatchNorm),
    LeakyRelu(LeakyRelu),
}

impl Layer {
    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Dense(d) => LayerSpec::Dense {
                input: d.input,
                output: d.output,
                bias: d.bias.is_some(),
            },
            Layer::BatchNorm(b) => LayerSpec::BatchNorm {
                dim: b.dim,
                affine: b.gamma.is_some(),
            },
            Layer::LeakyRelu(l) => LayerSpec::LeakyRelu { slope: l.slope },
        }
    }

    /// Input width, or `None` for shape-preserving activations.
    pub(crate) fn input_dim(&self) -> Option<usize> {
        match self {
            Layer::Dense(d) => Some(d.input),
            Layer::BatchNorm(b) => Some(b.dim),
            Layer::LeakyRelu(_) => None,
        }
    }

    pub(crate) fn output_dim(&self) -> Option<usize> {
        match self {
            Layer::Dense(d) => Some(d.output),
            Layer::BatchNorm(b) => Some(b.dim),
            Layer::LeakyRelu(_) => None,
        }
    }
}
