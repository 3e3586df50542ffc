use super::entropy::{check_rows, clamp_prob};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

fn check_pairs(target: &[Matrix], augmented: &[Matrix]) -> Result<()> {
    if target.len() != augmented.len() || target.is_empty() {
        return Err(Error::Shape(format!(
            "{} target heads vs {} augmented heads",
            target.len(),
            augmented.len()
        )));
    }
    let n = target[0].rows();
    for (m, (t, a)) in target.iter().zip(augmented).enumerate() {
        if t.shape() != a.shape() || t.rows() != n {
            return Err(Error::Shape(format!(
                "head {m}: target {}x{} vs augmented {}x{}",
                t.rows(),
                t.cols(),
                a.rows(),
                a.cols()
            )));
        }
        check_rows(t, "target")?;
    }
    Ok(())
}

/// Self-augmentation loss: mean over the batch of
/// `Σ_m Σ_y −target(y) · ln augmented(y)`.
///
/// `target` is a detached snapshot of the predictions on the clean points;
/// only `augmented` is treated as a function of the parameters.
pub fn sat_loss(target: &[Matrix], augmented: &[Matrix]) -> Result<f64> {
    check_pairs(target, augmented)?;
    Ok(sat_value(target, augmented))
}

fn sat_value(target: &[Matrix], augmented: &[Matrix]) -> f64 {
    let n = target[0].rows() as f64;
    let mut total = 0.0;
    for (t, a) in target.iter().zip(augmented) {
        for (tv, av) in t.as_slice().iter().zip(a.as_slice()) {
            total -= tv * clamp_prob(*av).ln();
        }
    }
    total / n
}

/// [`sat_loss`] together with its gradient with respect to `augmented`.
pub fn sat_loss_grad(target: &[Matrix], augmented: &[Matrix]) -> Result<(f64, Vec<Matrix>)> {
    check_pairs(target, augmented)?;
    let n = target[0].rows() as f64;
    let grads = target
        .iter()
        .zip(augmented)
        .map(|(t, a)| {
            let data = t
                .as_slice()
                .iter()
                .zip(a.as_slice())
                .map(|(tv, av)| {
                    let c = clamp_prob(*av);
                    if c == *av {
                        -tv / (c * n)
                    } else {
                        0.0
                    }
                })
                .collect();
            Matrix::from_raw(t.rows(), t.cols(), data)
        })
        .collect();
    Ok((sat_value(target, augmented), grads))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::conditional_entropy;

    #[test]
    fn equal_inputs_give_entropy() {
        let p = vec![Matrix::filled(3, 2, 0.5)];
        assert!((sat_loss(&p, &p).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let q = Matrix::from_rows(&[vec![0.2, 0.3, 0.5], vec![0.9, 0.05, 0.05]]).unwrap();
        let h = conditional_entropy(&q).unwrap();
        let q = vec![q];
        assert!((sat_loss(&q, &q).unwrap() - h).abs() < 1e-9);
    }

    #[test]
    fn confident_match_is_near_zero() {
        let t = vec![Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap()];
        let a = vec![Matrix::from_rows(&[vec![1.0 - 1e-8, 1e-8]]).unwrap()];
        let v = sat_loss(&t, &a).unwrap();
        assert!(v >= 0.0 && (v - 1e-8).abs() < 1e-12);
    }

    #[test]
    fn cross_entropy_value() {
        let t = vec![Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap()];
        let a = vec![Matrix::from_rows(&[vec![0.25, 0.75]]).unwrap()];
        let expected = -0.5 * 0.25f64.ln() - 0.5 * 0.75f64.ln();
        assert!((expected - 0.836988).abs() < 1e-6);
        assert!((sat_loss(&t, &a).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch() {
        let t = vec![Matrix::filled(2, 2, 0.5)];
        let a = vec![Matrix::filled(3, 2, 0.5)];
        assert!(matches!(sat_loss(&t, &a), Err(Error::Shape(_))));
        assert!(matches!(sat_loss(&t, &[]), Err(Error::Shape(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let t = vec![Matrix::from_rows(&[vec![0.3, 0.7], vec![0.9, 0.1]]).unwrap()];
        let a = vec![Matrix::from_rows(&[vec![0.4, 0.6], vec![0.2, 0.8]]).unwrap()];
        let (_, g) = sat_loss_grad(&t, &a).unwrap();
        let h = 1e-6;
        for idx in 0..4 {
            let mut up = a.clone();
            up[0].as_mut_slice()[idx] += h;
            let mut dn = a.clone();
            dn[0].as_mut_slice()[idx] -= h;
            let fd = (sat_value(&t, &up) - sat_value(&t, &dn)) / (2.0 * h);
            assert!((fd - g[0].as_slice()[idx]).abs() < 1e-6);
        }
    }
}
