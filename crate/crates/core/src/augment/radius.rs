use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Per-point perturbation radius `ε_i = α · σ_t(x_i)`, where `σ_t` is the
/// Euclidean distance to the t-th nearest other point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusTable {
    pub eps: Vec<f64>,
}

impl RadiusTable {
    /// Same radius for every point.
    pub fn constant(n: usize, eps: f64) -> Self {
        Self { eps: vec![eps; n] }
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> Vec<f64> {
        idx.iter().map(|&i| self.eps[i]).collect()
    }
}

/// Exact brute-force k-NN radius table.
pub fn radius_table(data: &Matrix, alpha: f64, t: usize) -> Result<RadiusTable> {
    let n = data.rows();
    if t == 0 || n <= t {
        return Err(Error::InvalidConfig(format!("need 1 <= t < N, got t = {t}, N = {n}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("alpha must be positive, got {alpha}")));
    }
    let mut eps = Vec::with_capacity(n);
    let mut dist = vec![0.0; n - 1];
    for i in 0..n {
        let xi = data.row(i);
        let mut k = 0;
        for j in 0..n {
            if j == i {
                continue;
            }
            dist[k] = xi
                .iter()
                .zip(data.row(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>();
            k += 1;
        }
        let (_, kth, _) = dist.select_nth_unstable_by(t - 1, |a, b| a.total_cmp(b));
        eps.push(alpha * kth.sqrt());
    }
    let zeros = eps.iter().filter(|&&e| e == 0.0).count();
    if zeros > 0 {
        log::warn!("{zeros} point(s) have a zero perturbation radius (duplicates within the {t} nearest)");
    }
    Ok(RadiusTable { eps })
}
