//! Virtual adversarial perturbations.
//!
//! Starting from a random unit direction `d`, each power iteration probes the
//! frozen model at `x + xi·d`, back-propagates the self-augmentation loss to
//! the input and renormalizes that gradient into the next `d`. The returned
//! row `i` is `eps_i · d_i`. Nothing here mutates the model, so the search
//! cannot leak gradients or batch statistics into training.

use rand::Rng;

use super::rpt::random_unit;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{MlpClassifier, Mode};
use crate::objectives::{PROB_CEIL, PROB_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VatOptions {
    /// Probe distance used by the power iteration.
    pub xi: f64,
    pub power_iters: usize,
    /// Normalization mode of the probe passes.
    pub mode: Mode,
    /// Evaluate both `+r` and `−r` and keep, per row, the sign with the larger
    /// loss. Power iteration only determines the direction up to sign.
    pub resolve_sign: bool,
}

impl Default for VatOptions {
    fn default() -> Self {
        Self {
            xi: 10.0,
            power_iters: 1,
            mode: Mode::Train,
            resolve_sign: true,
        }
    }
}

/// Per-row self-augmentation loss `Σ_m Σ_y −target · ln aug`.
pub fn sat_per_row(target: &[Matrix], augmented: &[Matrix]) -> Vec<f64> {
    let n = target.first().map_or(0, Matrix::rows);
    let mut out = vec![0.0; n];
    for (t, a) in target.iter().zip(augmented) {
        for (r, o) in out.iter_mut().enumerate() {
            *o -= t
                .row(r)
                .iter()
                .zip(a.row(r))
                .map(|(tv, av)| tv * av.clamp(PROB_FLOOR, PROB_CEIL).ln())
                .sum::<f64>();
        }
    }
    out
}

/// Gradient of the per-row loss `−Σ target·ln aug` wrt `aug`, without the
/// probability clamp of the training loss: a distant probe often saturates
/// the outputs, and a clamped (zero) gradient would carry no direction.
fn probe_grad(target: &[Matrix], augmented: &[Matrix]) -> Result<Vec<Matrix>> {
    if target.len() != augmented.len() {
        return Err(Error::Shape("head count mismatch".into()));
    }
    target
        .iter()
        .zip(augmented)
        .map(|(t, a)| {
            if t.shape() != a.shape() {
                return Err(Error::Shape("target and probe outputs differ in shape".into()));
            }
            let data = t
                .as_slice()
                .iter()
                .zip(a.as_slice())
                .map(|(tv, av)| -tv / av.max(f64::MIN_POSITIVE))
                .collect();
            Matrix::from_vec(t.rows(), t.cols(), data)
        })
        .collect()
}

/// Adversarial perturbation against the model's own predictions on `x`.
pub fn vat_direction<R: Rng + ?Sized>(
    model: &MlpClassifier,
    x: &Matrix,
    eps: &[f64],
    opts: &VatOptions,
    rng: &mut R,
) -> Result<Matrix> {
    let target = model.forward(x, opts.mode)?.heads;
    vat_direction_with_target(model, x, &target, eps, opts, rng)
}

/// As [`vat_direction`], reusing already computed clean predictions.
pub fn vat_direction_with_target<R: Rng + ?Sized>(
    model: &MlpClassifier,
    x: &Matrix,
    target: &[Matrix],
    eps: &[f64],
    opts: &VatOptions,
    rng: &mut R,
) -> Result<Matrix> {
    let (n, dim) = x.shape();
    if eps.len() != n {
        return Err(Error::Shape(format!("{} radii for {n} rows", eps.len())));
    }
    if let Some(e) = eps.iter().find(|e| !(**e >= 0.0)) {
        return Err(Error::InvalidInput(format!("negative radius {e}")));
    }
    if !(opts.xi > 0.0) {
        return Err(Error::InvalidConfig(format!("xi must be positive, got {}", opts.xi)));
    }

    let mut start = Matrix::zeros(n, dim);
    for r in 0..n {
        start.row_mut(r).copy_from_slice(&random_unit(dim, rng));
    }
    let mut d = start.clone();
    for _ in 0..opts.power_iters {
        let mut probe = x.clone();
        probe.add_scaled(&d, opts.xi)?;
        let pass = model.forward(&probe, opts.mode)?;
        let g = model.backward(&pass.cache, &probe_grad(target, &pass.heads)?)?.input;
        for r in 0..n {
            let gr = g.row(r);
            let norm = gr.iter().map(|v| v * v).sum::<f64>().sqrt();
            let dr = d.row_mut(r);
            if norm > 0.0 && norm.is_finite() {
                for (o, v) in dr.iter_mut().zip(gr) {
                    *o = v / norm;
                }
            } else {
                // No usable gradient: fall back to the random start direction.
                dr.copy_from_slice(start.row(r));
            }
        }
    }

    let mut r = Matrix::zeros(n, dim);
    for i in 0..n {
        for (o, v) in r.row_mut(i).iter_mut().zip(d.row(i)) {
            *o = eps[i] * v;
        }
    }

    if opts.resolve_sign {
        let mut plus = x.clone();
        plus.add_assign(&r)?;
        let mut minus = x.clone();
        minus.add_scaled(&r, -1.0)?;
        let lp = sat_per_row(target, &model.forward(&plus, opts.mode)?.heads);
        let lm = sat_per_row(target, &model.forward(&minus, opts.mode)?.heads);
        for i in 0..n {
            if lm[i] > lp[i] {
                r.row_mut(i).iter_mut().for_each(|v| *v = -*v);
            }
        }
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_model() -> MlpClassifier {
        let mut m = init_params(&[2, 2], &[0.0], 0).unwrap();
        m.layers_mut()[0].weight = Matrix::from_rows(&[vec![1.5, -1.0], vec![-0.5, 2.0]]).unwrap();
        m.layers_mut()[0].bias = vec![0.2, -0.1];
        m
    }

    #[test]
    fn zero_radius_rows_are_zero() {
        let m = toy_model();
        let x = Matrix::from_rows(&[vec![0.1, 0.2], vec![1.0, -1.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = vat_direction(&m, &x, &[0.0, 0.3], &VatOptions::default(), &mut rng).unwrap();
        assert_eq!(r.row(0), &[0.0, 0.0]);
        let n = r.row(1).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 0.3).abs() < 1e-9);
    }

    #[test]
    fn beats_direction_sweep_on_linear_model() {
        let m = toy_model();
        let opts = VatOptions {
            mode: Mode::Infer,
            ..VatOptions::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (k, x0) in [[0.1, 0.2], [1.0, -0.4], [-0.7, 0.9]].iter().enumerate() {
            let x = Matrix::from_rows(&[x0.to_vec()]).unwrap();
            let eps = 0.2 + 0.1 * k as f64;
            let target = m.predict(&x).unwrap();
            let r = vat_direction(&m, &x, &[eps], &opts, &mut rng).unwrap();
            let at = |dx: f64, dy: f64| {
                let p = Matrix::from_rows(&[vec![x0[0] + dx, x0[1] + dy]]).unwrap();
                sat_per_row(&target, &m.predict(&p).unwrap())[0]
            };
            let ours = at(r.get(0, 0), r.get(0, 1));
            for j in 0..64 {
                let a = j as f64 * std::f64::consts::TAU / 64.0;
                assert!(ours >= at(eps * a.cos(), eps * a.sin()) - 1e-6);
            }
        }
    }

    #[test]
    fn constant_model_falls_back_to_random_direction() {
        // Zero weights: predictions do not depend on x, so the gradient is zero.
        let m = init_params(&[3, 2], &[0.0], 0).unwrap();
        let x = Matrix::from_rows(&[vec![0.0, 1.0, 2.0]]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = vat_direction(&m, &x, &[0.5], &VatOptions::default(), &mut rng).unwrap();
        let n = r.row(0).iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((n - 0.5).abs() < 1e-12);
    }
}
