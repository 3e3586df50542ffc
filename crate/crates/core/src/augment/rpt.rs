use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Uniform direction on the unit sphere (normalized Gaussian sample).
pub fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// `x + r` with `r` drawn uniformly from the sphere `||r||₂ = eps`.
pub fn rpt_sample<R: Rng + ?Sized>(x_row: &[f64], eps: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidInput(format!("perturbation radius must be >= 0, got {eps}")));
    }
    let d = random_unit(x_row.len(), rng);
    Ok(x_row.iter().zip(d).map(|(x, u)| x + eps * u).collect())
}

/// Random-sphere perturbations for a whole batch, one radius per row.
pub fn rpt_perturbation<R: Rng + ?Sized>(rows: usize, cols: usize, eps: &[f64], rng: &mut R) -> Result<Matrix> {
    if eps.len() != rows {
        return Err(Error::Shape(format!("{} radii for {rows} rows", eps.len())));
    }
    let mut out = Matrix::zeros(rows, cols);
    for (r, &e) in eps.iter().enumerate() {
        if !(e >= 0.0) {
            return Err(Error::InvalidInput(format!("negative radius {e}")));
        }
        let d = random_unit(cols, rng);
        for (o, u) in out.row_mut(r).iter_mut().zip(d) {
            *o = e * u;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_radius_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let x = [0.3, -1.2, 5.0];
        assert_eq!(rpt_sample(&x, 0.0, &mut rng).unwrap(), x.to_vec());
    }

    #[test]
    fn norm_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = [1.0, 2.0, -3.0, 0.5];
        for &eps in &[1e-3, 0.25, 1.0, 7.5] {
            let y = rpt_sample(&x, eps, &mut rng).unwrap();
            let n = x.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!((n - eps).abs() < 1e-9);
        }
    }

    #[test]
    fn directions_are_uniform_on_circle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut mean = [0.0; 2];
        let n = 10_000;
        for _ in 0..n {
            let y = rpt_sample(&[0.0, 0.0], 1.0, &mut rng).unwrap();
            mean[0] += y[0] / n as f64;
            mean[1] += y[1] / n as f64;
        }
        assert!((mean[0].powi(2) + mean[1].powi(2)).sqrt() < 0.05);
    }
}
