//! Data augmentations used by self-augmented training.

mod affine;
mod radius;
mod rpt;
mod vat;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use affine::{affine_batch, affine_distort, apply_affine, AffineParams, AffineRanges};
pub use radius::{radius_table, RadiusTable};
pub use rpt::{random_unit, rpt_perturbation, rpt_sample};
pub use vat::{sat_per_row, vat_direction, vat_direction_with_target, VatOptions};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::nn::{MlpClassifier, Mode};
use crate::objectives::sat_loss;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbKind {
    Rpt,
    Vat,
    Affine,
    Composite,
}

impl std::str::FromStr for PerturbKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rpt" => Ok(Self::Rpt),
            "vat" => Ok(Self::Vat),
            "affine" => Ok(Self::Affine),
            "composite" => Ok(Self::Composite),
            _ => Err(Error::InvalidConfig(format!("unknown perturbation kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbSpec {
    pub kind: PerturbKind,
    /// Radius scale: `ε_i = alpha · σ_t(x_i)`.
    pub alpha: f64,
    pub t_neighbor: usize,
    pub xi: f64,
    pub power_iters: usize,
    /// Components of a composite augmentation and their weights.
    pub mixture: Vec<(PerturbKind, f64)>,
    pub affine: AffineRanges,
}

impl Default for PerturbSpec {
    fn default() -> Self {
        Self {
            kind: PerturbKind::Vat,
            alpha: 0.25,
            t_neighbor: 10,
            xi: 10.0,
            power_iters: 1,
            mixture: vec![(PerturbKind::Vat, 0.5), (PerturbKind::Affine, 0.5)],
            affine: AffineRanges::default(),
        }
    }
}

impl PerturbSpec {
    pub fn new(kind: PerturbKind, alpha: f64) -> Self {
        Self {
            kind,
            alpha,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::InvalidConfig(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.t_neighbor == 0 {
            return Err(Error::InvalidConfig("t_neighbor must be at least 1".into()));
        }
        if !(self.xi > 0.0) {
            return Err(Error::InvalidConfig(format!("xi must be positive, got {}", self.xi)));
        }
        if self.kind == PerturbKind::Composite {
            if self.mixture.is_empty() {
                return Err(Error::InvalidConfig("composite augmentation needs components".into()));
            }
            if self.mixture.iter().any(|(k, _)| *k == PerturbKind::Composite) {
                return Err(Error::InvalidConfig("composite components cannot be composite".into()));
            }
            if self.mixture.iter().any(|(_, w)| !(*w >= 0.0)) {
                return Err(Error::InvalidConfig("mixture weights must be nonnegative".into()));
            }
            let total: f64 = self.mixture.iter().map(|(_, w)| w).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!("mixture weights sum to {total}, expected 1")));
            }
        }
        Ok(())
    }

    /// Weighted primitive augmentations this spec expands to.
    pub fn components(&self) -> Vec<(PerturbKind, f64)> {
        match self.kind {
            PerturbKind::Composite => self.mixture.clone(),
            k => vec![(k, 1.0)],
        }
    }

    pub fn needs_radius(&self) -> bool {
        self.components()
            .iter()
            .any(|(k, _)| matches!(k, PerturbKind::Rpt | PerturbKind::Vat))
    }

    pub fn vat_options(&self, mode: Mode) -> VatOptions {
        VatOptions {
            xi: self.xi,
            power_iters: self.power_iters,
            mode,
            ..VatOptions::default()
        }
    }
}

/// Augmented copy `T(x)` of a batch for one primitive augmentation.
///
/// `target` holds the clean predictions of `model` on `x`; it is only read by VAT.
#[allow(clippy::too_many_arguments)]
pub fn augment_batch<R: Rng + ?Sized>(
    kind: PerturbKind,
    spec: &PerturbSpec,
    model: &MlpClassifier,
    x: &Matrix,
    target: &[Matrix],
    eps: &[f64],
    image_shape: Option<(usize, usize)>,
    mode: Mode,
    rng: &mut R,
) -> Result<Matrix> {
    match kind {
        PerturbKind::Rpt => {
            let r = rpt_perturbation(x.rows(), x.cols(), eps, rng)?;
            x.add(&r)
        }
        PerturbKind::Vat => {
            let r = vat_direction_with_target(model, x, target, eps, &spec.vat_options(mode), rng)?;
            x.add(&r)
        }
        PerturbKind::Affine => affine_batch(x, image_shape, &spec.affine, rng),
        PerturbKind::Composite => Err(Error::InvalidConfig(
            "composite augmentation must be expanded into its components".into(),
        )),
    }
}

/// Weighted sum of self-augmentation losses, one per component of `spec`.
pub fn composite_sat<R: Rng + ?Sized>(
    model: &MlpClassifier,
    x: &Matrix,
    spec: &PerturbSpec,
    eps: &[f64],
    image_shape: Option<(usize, usize)>,
    mode: Mode,
    rng: &mut R,
) -> Result<f64> {
    spec.validate()?;
    let target = model.forward(x, mode)?.heads;
    let mut total = 0.0;
    for (kind, w) in spec.components() {
        let aug = augment_batch(kind, spec, model, x, &target, eps, image_shape, mode, rng)?;
        let out = model.forward(&aug, mode)?.heads;
        total += w * sat_loss(&target, &out)?;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::init_params;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_spec() {
        let s = PerturbSpec::default();
        assert_eq!((s.t_neighbor, s.xi, s.power_iters), (10, 10.0, 1));
        assert_eq!(s.mixture, vec![(PerturbKind::Vat, 0.5), (PerturbKind::Affine, 0.5)]);
        assert_eq!(s.affine, AffineRanges::default());
        s.validate().unwrap();
    }

    #[test]
    fn rejects_bad_mixture() {
        let mut s = PerturbSpec::new(PerturbKind::Composite, 0.25);
        s.mixture = vec![(PerturbKind::Vat, 0.7), (PerturbKind::Affine, 0.7)];
        assert!(s.validate().is_err());
        s.mixture = vec![(PerturbKind::Composite, 1.0)];
        assert!(s.validate().is_err());
        assert!(PerturbSpec::new(PerturbKind::Vat, 0.0).validate().is_err());
    }

    #[test]
    fn single_component_equals_plain_sat() {
        let m = init_params(&[3, 4, 2], &[1.0, 1.0], 5).unwrap();
        let x = Matrix::from_rows(&[vec![0.1, 0.2, 0.3], vec![-1.0, 0.5, 2.0], vec![0.0, 0.0, 1.0]]).unwrap();
        let eps = [0.3, 0.3, 0.3];
        let spec = PerturbSpec::new(PerturbKind::Rpt, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let got = composite_sat(&m, &x, &spec, &eps, None, Mode::Infer, &mut rng).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let target = m.predict(&x).unwrap();
        let r = rpt_perturbation(3, 3, &eps, &mut rng).unwrap();
        let want = sat_loss(&target, &m.predict(&x.add(&r).unwrap()).unwrap()).unwrap();
        assert_eq!(got, want);
    }

    #[test]
    fn affine_without_shape_is_config_error() {
        let m = init_params(&[4, 2], &[1.0], 0).unwrap();
        let x = Matrix::zeros(2, 4);
        let spec = PerturbSpec::new(PerturbKind::Affine, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = composite_sat(&m, &x, &spec, &[0.0, 0.0], None, Mode::Infer, &mut rng);
        assert!(matches!(r, Err(Error::InvalidConfig(_))));
    }
}
