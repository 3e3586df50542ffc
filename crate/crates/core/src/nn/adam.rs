use serde::{Deserialize, Serialize};

use super::model::{Gradients, MlpClassifier};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub step_size: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// L2 coefficient added to weight-matrix gradients (`g += wd · W`).
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            step_size: 0.002,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    /// One accumulator pair per parameter tensor of the given lengths.
    pub fn new(tensor_lens: &[usize], config: AdamConfig) -> Result<Self> {
        if !(config.step_size > 0.0) || config.weight_decay < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "adam needs step_size > 0 and weight_decay >= 0, got {config:?}"
            )));
        }
        Ok(Self {
            config,
            m: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            v: tensor_lens.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        })
    }

    pub fn for_model(model: &MlpClassifier, config: AdamConfig) -> Result<Self> {
        Self::new(&model.param_shapes(), config)
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moment(&self, tensor: usize) -> &[f64] {
        &self.m[tensor]
    }

    pub fn second_moment(&self, tensor: usize) -> &[f64] {
        &self.v[tensor]
    }

    /// Updates every `(param, decays)` tensor in place with its gradient.
    pub fn step(&mut self, params: &mut [(&mut [f64], bool)], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Shape(format!(
                "adam tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for (i, ((p, _), g)) in params.iter().zip(grads).enumerate() {
            if p.len() != self.m[i].len() || g.len() != self.m[i].len() {
                return Err(Error::Shape(format!(
                    "tensor {i}: accumulator {} vs param {} vs grad {}",
                    self.m[i].len(),
                    p.len(),
                    g.len()
                )));
            }
        }

        self.step += 1;
        let AdamConfig {
            step_size,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        for (i, ((p, decays), g)) in params.iter_mut().zip(grads).enumerate() {
            let wd = if *decays { weight_decay } else { 0.0 };
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.len() {
                let gj = g[j] + wd * p[j];
                m[j] = beta1 * m[j] + (1.0 - beta1) * gj;
                v[j] = beta2 * v[j] + (1.0 - beta2) * gj * gj;
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                p[j] -= step_size * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }

    /// Applies one update to a model's parameters.
    pub fn step_model(&mut self, model: &mut MlpClassifier, grads: &Gradients) -> Result<()> {
        let g = grads.tensors();
        let mut params = model.param_tensors_mut();
        self.step(&mut params, &g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_step_size() {
        let mut st = AdamState::new(&[3], AdamConfig::default()).unwrap();
        let mut p = vec![1.0, -2.0, 0.5];
        let g = vec![1.0; 3];
        st.step(&mut [(&mut p, false)], &[&g]).unwrap();
        // m̂ = g, v̂ = g², update = lr · 1 / (1 + eps)
        let expected = 0.002 / (1.0 + 1e-8);
        assert!((1.0 - p[0] - expected).abs() < 1e-15);
        assert!((-2.0 - p[1] - expected).abs() < 1e-15);
        assert_eq!(st.steps(), 1);
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut st = AdamState::new(&[2, 1], AdamConfig::default()).unwrap();
        let mut a = vec![0.3, -0.7];
        let mut b = vec![4.0];
        for _ in 0..3 {
            st.step(&mut [(&mut a, true), (&mut b, false)], &[&[0.0, 0.0], &[0.0]]).unwrap();
        }
        assert_eq!(a, vec![0.3, -0.7]);
        assert_eq!(b, vec![4.0]);
        assert_eq!(st.steps(), 3);
    }

    #[test]
    fn weight_decay_adds_to_weight_gradients_only() {
        let cfg = AdamConfig {
            weight_decay: 0.005,
            ..AdamConfig::default()
        };
        let mut st = AdamState::new(&[1, 1], cfg).unwrap();
        let mut w = vec![1.0];
        let mut b = vec![1.0];
        st.step(&mut [(&mut w, true), (&mut b, false)], &[&[0.0], &[0.0]]).unwrap();
        // m = (1 - β1) · g_eff with g_eff = 0.005 · 1.0
        assert!((st.first_moment(0)[0] - 0.1 * 0.005).abs() < 1e-18);
        assert_eq!(st.first_moment(1)[0], 0.0);
        assert!(w[0] < 1.0);
        assert_eq!(b[0], 1.0);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut st = AdamState::new(&[2], AdamConfig::default()).unwrap();
        let mut p = vec![0.0; 3];
        assert!(matches!(st.step(&mut [(&mut p, false)], &[&[0.0; 3]]), Err(Error::Shape(_))));
        assert_eq!(st.steps(), 0);
    }
}
