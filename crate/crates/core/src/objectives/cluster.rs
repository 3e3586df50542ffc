use serde::{Deserialize, Serialize};

use super::entropy::{check_distribution, check_rows, entropy_unchecked, xlogx, xlogx_grad};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Penalized clustering objective
/// `sat + λ·H(Y|X) + μ·max(KL[p̂(y) || q] − δ, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterObjective {
    pub lambda: f64,
    pub delta: f64,
    pub mu: f64,
    pub prior_q: Vec<f64>,
}

/// Value of each term of the clustering objective on one batch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClusterTerms {
    pub sat: f64,
    pub cond_entropy: f64,
    pub marginal_entropy: f64,
    pub kl: f64,
    pub penalty: f64,
    pub total: f64,
}

impl ClusterObjective {
    /// `delta_frac · h(q)` tolerance, `μ = 0`.
    pub fn new(lambda: f64, prior_q: Vec<f64>, delta_frac: f64) -> Result<Self> {
        check_distribution(&prior_q, "prior q")?;
        if (prior_q.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution("prior q must sum to 1 within 1e-9".into()));
        }
        if prior_q.iter().any(|&v| v <= 0.0) {
            return Err(Error::InvalidDistribution("prior q entries must be positive".into()));
        }
        if !(lambda > 0.0) || !(delta_frac >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "need lambda > 0 and delta_frac >= 0, got {lambda}, {delta_frac}"
            )));
        }
        let delta = delta_frac * entropy_unchecked(&prior_q);
        Ok(Self {
            lambda,
            delta,
            mu: 0.0,
            prior_q,
        })
    }

    pub fn uniform(k: usize, lambda: f64) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidConfig("need at least one cluster".into()));
        }
        Self::new(lambda, vec![1.0 / k as f64; k], 0.01)
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn k(&self) -> usize {
        self.prior_q.len()
    }

    fn check(&self, probs: &Matrix) -> Result<()> {
        if probs.cols() != self.k() {
            return Err(Error::Shape(format!(
                "batch has {} categories, prior has {}",
                probs.cols(),
                self.k()
            )));
        }
        if probs.rows() == 0 {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        check_rows(probs, "batch")
    }

    fn terms(&self, probs: &Matrix, sat: f64) -> (ClusterTerms, Vec<f64>) {
        let n = probs.rows() as f64;
        let cond = -probs.as_slice().iter().map(|&p| xlogx(p)).sum::<f64>() / n;
        let marginal = probs.column_means();
        let marg_h = -marginal.iter().map(|&p| xlogx(p)).sum::<f64>();
        let kl = marginal
            .iter()
            .zip(&self.prior_q)
            .map(|(&p, &q)| xlogx(p) - p * q.ln())
            .sum::<f64>();
        let penalty = self.mu * (kl - self.delta).max(0.0);
        let total = sat + self.lambda * cond + penalty;
        (
            ClusterTerms {
                sat,
                cond_entropy: cond,
                marginal_entropy: marg_h,
                kl,
                penalty,
                total,
            },
            marginal,
        )
    }

    pub fn evaluate(&self, probs: &Matrix, sat: f64) -> Result<ClusterTerms> {
        self.check(probs)?;
        Ok(self.terms(probs, sat).0)
    }

    /// Terms (with `sat = 0`) and the gradient of `λ·H(Y|X) + penalty` with
    /// respect to the batch probabilities. The hinge has slope 0 at its kink.
    pub fn gradient(&self, probs: &Matrix) -> Result<(ClusterTerms, Matrix)> {
        self.check(probs)?;
        let (terms, marginal) = self.terms(probs, 0.0);
        let n = probs.rows() as f64;
        let active = self.mu > 0.0 && terms.kl - self.delta > 0.0;
        let kl_grad: Vec<f64> = marginal
            .iter()
            .zip(&self.prior_q)
            .map(|(&p, &q)| if active { self.mu * (xlogx_grad(p) - q.ln()) / n } else { 0.0 })
            .collect();
        let mut g = Matrix::zeros(probs.rows(), probs.cols());
        for r in 0..probs.rows() {
            let pr = probs.row(r);
            for (k, o) in g.row_mut(r).iter_mut().enumerate() {
                *o = -self.lambda * xlogx_grad(pr[k]) / n + kl_grad[k];
            }
        }
        Ok((terms, g))
    }
}

/// `sat + λ·H(Y|X) + μ·max(KL[p̂_B || q] − δ, 0)` for one batch.
pub fn clustering_loss(batch_probs: &Matrix, sat: f64, cfg: &ClusterObjective) -> Result<f64> {
    Ok(cfg.evaluate(batch_probs, sat)?.total)
}
