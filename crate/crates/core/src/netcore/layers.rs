use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const BN_MOMENTUM: f64 = 0.1;
pub const BN_EPS: f64 = 1e-5;

/// Fully connected layer, `y = x·W + b` with `W` of shape `in × out`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let data = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..limit))
            .collect();
        Dense {
            weight: Matrix::from_parts(in_dim, out_dim, data),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize) -> Self {
        Dense {
            weight: Matrix::zeros(in_dim, out_dim),
            bias: vec![0.0; out_dim],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn forward(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.in_dim() {
            return Err(Error::dim("dense input width", self.in_dim(), input.cols()));
        }
        let mut out = input.matmul(&self.weight)?;
        out.add_row_broadcast(&self.bias)?;
        Ok(out)
    }

    /// Returns `(dW, db, dX)` for the recorded input.
    pub fn backward(
        &self,
        input: &Matrix,
        grad_out: &Matrix,
    ) -> Result<(Matrix, Vec<f64>, Matrix)> {
        let grad_w = input.t_matmul(grad_out)?;
        let grad_b = grad_out.column_sums();
        let grad_in = grad_out.matmul_t(&self.weight)?;
        Ok((grad_w, grad_b, grad_in))
    }
}

/// Which statistics a batch-normalization layer normalizes with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BnMode {
    /// Batch statistics; running statistics follow an exponential average.
    Train,
    /// Running statistics; nothing is mutated.
    Eval,
    /// Batch statistics, which then replace the running statistics outright.
    AdaBn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
    pub mode: BnMode,
}

/// Values recorded by a batch-normalization forward pass for backprop.
#[derive(Debug, Clone)]
pub struct BnCache {
    normalized: Matrix,
    inv_std: Vec<f64>,
    batch_stats: bool,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        BatchNorm {
            gamma: vec![1.0; dim],
            beta: vec![0.0; dim],
            running_mean: vec![0.0; dim],
            running_var: vec![1.0; dim],
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
            mode: BnMode::Train,
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&mut self, input: &Matrix) -> Result<(Matrix, BnCache)> {
        if input.cols() != self.dim() {
            return Err(Error::dim(
                "batch-norm input width",
                self.dim(),
                input.cols(),
            ));
        }
        let batch_stats = self.mode != BnMode::Eval;
        let (mean, var) = if batch_stats {
            if input.rows() < 2 {
                return Err(Error::DegenerateBatch(format!(
                    "{:?}-mode batch normalization needs at least 2 rows, got {}",
                    self.mode,
                    input.rows()
                )));
            }
            let mean = input.column_means();
            let var = input.column_variances(&mean);
            match self.mode {
                BnMode::Train => {
                    let m = self.momentum;
                    for (r, b) in self.running_mean.iter_mut().zip(&mean) {
                        *r = (1.0 - m) * *r + m * b;
                    }
                    for (r, b) in self.running_var.iter_mut().zip(&var) {
                        *r = (1.0 - m) * *r + m * b;
                    }
                }
                BnMode::AdaBn => {
                    self.running_mean.clone_from(&mean);
                    self.running_var.clone_from(&var);
                }
                BnMode::Eval => unreachable!(),
            }
            (mean, var)
        } else {
            (self.running_mean.clone(), self.running_var.clone())
        };

        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut normalized = input.clone();
        let mut out = input.clone();
        let cols = input.cols();
        for (nrow, orow) in normalized
            .as_mut_slice()
            .chunks_exact_mut(cols)
            .zip(out.as_mut_slice().chunks_exact_mut(cols))
        {
            for j in 0..cols {
                let xh = (nrow[j] - mean[j]) * inv_std[j];
                nrow[j] = xh;
                orow[j] = self.gamma[j] * xh + self.beta[j];
            }
        }
        Ok((
            out,
            BnCache {
                normalized,
                inv_std,
                batch_stats,
            },
        ))
    }

    /// Returns `(dγ, dβ, dX)`.
    pub fn backward(
        &self,
        cache: &BnCache,
        grad_out: &Matrix,
    ) -> Result<(Vec<f64>, Vec<f64>, Matrix)> {
        if grad_out.shape() != cache.normalized.shape() {
            return Err(Error::dim(
                "batch-norm backward",
                format!("{:?}", cache.normalized.shape()),
                format!("{:?}", grad_out.shape()),
            ));
        }
        let cols = grad_out.cols();
        let n = grad_out.rows() as f64;
        let grad_beta = grad_out.column_sums();
        let mut grad_gamma = vec![0.0; cols];
        for (g, xh) in grad_out.row_iter().zip(cache.normalized.row_iter()) {
            for j in 0..cols {
                grad_gamma[j] += g[j] * xh[j];
            }
        }

        let mut grad_in = grad_out.clone();
        for (gi, xh) in grad_in
            .as_mut_slice()
            .chunks_exact_mut(cols)
            .zip(cache.normalized.row_iter())
        {
            for j in 0..cols {
                let scale = self.gamma[j] * cache.inv_std[j];
                gi[j] = if cache.batch_stats {
                    scale * (gi[j] - grad_beta[j] / n - xh[j] * grad_gamma[j] / n)
                } else {
                    scale * gi[j]
                };
            }
        }
        Ok((grad_gamma, grad_beta, grad_in))
    }
}

pub fn relu(input: &Matrix) -> Matrix {
    input.map(|v| v.max(0.0))
}

/// Passes gradient where the recorded input was strictly positive.
pub fn relu_backward(input: &Matrix, grad_out: &Matrix) -> Result<Matrix> {
    input.zip_map(grad_out, |x, g| if x > 0.0 { g } else { 0.0 })
}
