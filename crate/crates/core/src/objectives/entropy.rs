//! Entropy, KL divergence and mini-batch marginals (natural logarithms).

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Probabilities entering a log inside a training loss are clamped to this
/// interval so that no term becomes infinite.
pub const PROB_FLOOR: f64 = 1e-8;
pub const PROB_CEIL: f64 = 1.0 - 1e-8;

const SUM_TOL: f64 = 1e-6;

#[inline]
pub(crate) fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_FLOOR, PROB_CEIL)
}

/// `p · ln(clamp(p))`, the building block of every clamped entropy.
#[inline]
pub(crate) fn xlogx(p: f64) -> f64 {
    p * clamp_prob(p).ln()
}

/// Derivative of [`xlogx`]; the clamp contributes zero slope outside its range.
#[inline]
pub(crate) fn xlogx_grad(p: f64) -> f64 {
    let c = clamp_prob(p);
    if p == c {
        c.ln() + 1.0
    } else {
        c.ln()
    }
}

pub(crate) fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidDistribution(format!("{what} is empty")));
    }
    if let Some(v) = p.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::InvalidDistribution(format!("{what} has invalid entry {v}")));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidDistribution(format!("{what} sums to {s}")));
    }
    Ok(())
}

pub(crate) fn check_rows(m: &Matrix, what: &str) -> Result<()> {
    for (i, row) in m.row_iter().enumerate() {
        check_distribution(row, &format!("{what} row {i}"))?;
    }
    Ok(())
}

/// `h(p) = −Σ p ln p` with `0 ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    check_distribution(p, "distribution")?;
    Ok(entropy_unchecked(p))
}

pub(crate) fn entropy_unchecked(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|&v| v * v.ln()).sum::<f64>()
}

/// Mean of the per-row entropies.
pub fn conditional_entropy(batch_probs: &Matrix) -> Result<f64> {
    check_rows(batch_probs, "batch")?;
    let total: f64 = batch_probs.row_iter().map(entropy_unchecked).sum();
    Ok(total / batch_probs.rows() as f64)
}

/// Column mean of the batch probabilities.
pub fn marginal_estimate(batch_probs: &Matrix) -> Result<Vec<f64>> {
    if batch_probs.rows() == 0 || batch_probs.cols() == 0 {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    check_rows(batch_probs, "batch")?;
    Ok(batch_probs.column_means())
}

/// `KL[p || q] = Σ p ln(p / q)`.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Shape(format!("KL over {} vs {} categories", p.len(), q.len())));
    }
    check_distribution(p, "p")?;
    check_distribution(q, "q")?;
    if let Some(v) = q.iter().find(|v| **v <= 0.0) {
        return Err(Error::InvalidDistribution(format!("q has non-positive entry {v}")));
    }
    Ok(kl_unchecked(p, q))
}

pub(crate) fn kl_unchecked(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi / qi).ln())
        .sum::<f64>()
        .max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_examples() {
        assert!((shannon_entropy(&[0.5, 0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(shannon_entropy(&[1.0, 0.0]).unwrap(), 0.0);
        // −0.25 ln 0.25 − 0.75 ln 0.75
        let direct = -(0.25f64 * 0.25f64.ln() + 0.75 * 0.75f64.ln());
        assert!((direct - 0.562335).abs() < 1e-6);
        assert!((shannon_entropy(&[0.25, 0.75]).unwrap() - direct).abs() < 1e-15);
    }

    #[test]
    fn entropy_rejects_bad_distributions() {
        assert!(matches!(shannon_entropy(&[0.6, 0.6]), Err(Error::InvalidDistribution(_))));
        assert!(matches!(shannon_entropy(&[1.5, -0.5]), Err(Error::InvalidDistribution(_))));
        assert!(matches!(shannon_entropy(&[]), Err(Error::InvalidDistribution(_))));
    }

    #[test]
    fn conditional_entropy_examples() {
        let det = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(conditional_entropy(&det).unwrap(), 0.0);
        let uni = Matrix::filled(2, 4, 0.25);
        assert!((conditional_entropy(&uni).unwrap() - 4f64.ln()).abs() < 1e-15);
        let mixed = Matrix::from_rows(&[vec![0.5, 0.5], vec![1.0, 0.0]]).unwrap();
        assert!((conditional_entropy(&mixed).unwrap() - 0.346574).abs() < 1e-6);
    }

    #[test]
    fn marginal_examples() {
        let m = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(marginal_estimate(&m).unwrap(), vec![0.5, 0.5]);
        let one = Matrix::from_rows(&[vec![0.1, 0.2, 0.7]]).unwrap();
        assert_eq!(marginal_estimate(&one).unwrap(), vec![0.1, 0.2, 0.7]);
        let three = Matrix::from_rows(&[vec![0.2, 0.8], vec![0.6, 0.4], vec![0.1, 0.9]]).unwrap();
        let got = marginal_estimate(&three).unwrap();
        assert!((got[0] - 0.3).abs() < 1e-15 && (got[1] - 0.7).abs() < 1e-15);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(kl_divergence(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert!((kl_divergence(&[1.0, 0.0], &[0.5, 0.5]).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        for k in 1..8 {
            let u = vec![1.0 / k as f64; k];
            assert!(kl_divergence(&u, &u).unwrap().abs() < 1e-15);
        }
        assert!(matches!(kl_divergence(&[1.0], &[0.5, 0.5]), Err(Error::Shape(_))));
        assert!(matches!(kl_divergence(&[0.5, 0.5], &[1.0, 0.0]), Err(Error::InvalidDistribution(_))));
    }

    #[test]
    fn xlogx_grad_matches_finite_difference() {
        for &p in &[0.01, 0.3, 0.5, 0.97] {
            let h = 1e-7;
            let fd = (xlogx(p + h) - xlogx(p - h)) / (2.0 * h);
            assert!((fd - xlogx_grad(p)).abs() < 1e-6);
        }
    }
}
