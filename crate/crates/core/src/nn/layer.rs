use serde::{Deserialize, Serialize};

use crate::matrix::Matrix;

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

/// Per-unit batch normalization with learned affine parameters.
///
/// Running statistics follow `running = momentum * running + (1 - momentum) * batch`;
/// the running variance uses the unbiased batch estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
    pub momentum: f64,
    pub eps: f64,
}

impl BatchNorm {
    pub fn new(units: usize) -> Self {
        Self {
            gamma: vec![1.0; units],
            beta: vec![0.0; units],
            running_mean: vec![0.0; units],
            running_var: vec![1.0; units],
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
        }
    }

    pub fn units(&self) -> usize {
        self.gamma.len()
    }

    pub(crate) fn update_running(&mut self, mean: &[f64], var: &[f64], batch: usize) {
        let unbias = if batch > 1 {
            batch as f64 / (batch as f64 - 1.0)
        } else {
            1.0
        };
        let m = self.momentum;
        for u in 0..self.units() {
            self.running_mean[u] = m * self.running_mean[u] + (1.0 - m) * mean[u];
            self.running_var[u] = m * self.running_var[u] + (1.0 - m) * var[u] * unbias;
        }
    }
}

/// Affine map `x·W + b`, optionally followed by batch norm and ReLU.
///
/// Hidden layers carry a [`BatchNorm`]; the output layer does not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    /// `fan_in × fan_out`
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub bn: Option<BatchNorm>,
}

impl DenseLayer {
    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }

    pub fn is_hidden(&self) -> bool {
        self.bn.is_some()
    }

    pub fn num_params(&self) -> usize {
        let bn = self.bn.as_ref().map_or(0, |b| 2 * b.units());
        self.weight.rows() * self.weight.cols() + self.bias.len() + bn
    }

    pub(crate) fn affine(&self, x: &Matrix) -> Matrix {
        let mut z = x.matmul(&self.weight).expect("layer input width checked by caller");
        for r in 0..z.rows() {
            for (v, b) in z.row_mut(r).iter_mut().zip(&self.bias) {
                *v += b;
            }
        }
        z
    }
}
