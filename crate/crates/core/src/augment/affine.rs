//! Stochastic affine distortion of small grayscale images.
//!
//! The forward map sends an input pixel `p` to `A·(p − c) + c + t` where `c`
//! is the image center and `A = scale · rotate · shear`. Output pixels are
//! pulled back through the inverse map and resampled bilinearly, with zeros
//! outside the source image. Coordinates are `(x = column, y = row)` in pixels.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Sampling intervals for each distortion component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineRanges {
    pub scale: (f64, f64),
    /// Pixels.
    pub translate: (f64, f64),
    /// Degrees.
    pub rotate_deg: (f64, f64),
    pub shear: (f64, f64),
}

impl Default for AffineRanges {
    fn default() -> Self {
        Self {
            scale: (0.8, 1.2),
            translate: (-0.4, 0.4),
            rotate_deg: (-10.0, 10.0),
            shear: (-0.3, 0.3),
        }
    }
}

/// One concrete distortion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineParams {
    pub scale_x: f64,
    pub scale_y: f64,
    pub translate_x: f64,
    pub translate_y: f64,
    pub rotate_deg: f64,
    pub shear_x: f64,
    pub shear_y: f64,
}

impl AffineParams {
    pub const IDENTITY: AffineParams = AffineParams {
        scale_x: 1.0,
        scale_y: 1.0,
        translate_x: 0.0,
        translate_y: 0.0,
        rotate_deg: 0.0,
        shear_x: 0.0,
        shear_y: 0.0,
    };

    pub fn sample<R: Rng + ?Sized>(ranges: &AffineRanges, rng: &mut R) -> Self {
        let mut u = |(lo, hi): (f64, f64)| if hi > lo { rng.random_range(lo..=hi) } else { lo };
        Self {
            scale_x: u(ranges.scale),
            scale_y: u(ranges.scale),
            translate_x: u(ranges.translate),
            translate_y: u(ranges.translate),
            rotate_deg: u(ranges.rotate_deg),
            shear_x: u(ranges.shear),
            shear_y: u(ranges.shear),
        }
    }

    /// `scale · rotate · shear` as `[[a, b], [c, d]]`.
    pub fn linear_part(&self) -> [[f64; 2]; 2] {
        let (s, c) = self.rotate_deg.to_radians().sin_cos();
        let rot = [[c, -s], [s, c]];
        let shear = [[1.0, self.shear_x], [self.shear_y, 1.0]];
        let rs = mul2(&rot, &shear);
        [
            [self.scale_x * rs[0][0], self.scale_x * rs[0][1]],
            [self.scale_y * rs[1][0], self.scale_y * rs[1][1]],
        ]
    }
}

fn mul2(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

/// Applies a fixed distortion to an `H × W` image.
pub fn apply_affine(image: &Matrix, params: &AffineParams) -> Result<Matrix> {
    let (h, w) = image.shape();
    if h < 2 || w < 2 {
        return Err(Error::InvalidConfig(format!("image must be at least 2x2, got {h}x{w}")));
    }
    let a = params.linear_part();
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.abs() < 1e-12 {
        return Err(Error::InvalidConfig("affine map is singular".into()));
    }
    let inv = [[a[1][1] / det, -a[0][1] / det], [-a[1][0] / det, a[0][0] / det]];
    let cx = (w as f64 - 1.0) / 2.0;
    let cy = (h as f64 - 1.0) / 2.0;

    let mut out = Matrix::zeros(h, w);
    for y in 0..h {
        for x in 0..w {
            let ox = x as f64 - cx - params.translate_x;
            let oy = y as f64 - cy - params.translate_y;
            let sx = inv[0][0] * ox + inv[0][1] * oy + cx;
            let sy = inv[1][0] * ox + inv[1][1] * oy + cy;
            out.set(y, x, bilinear(image, sx, sy));
        }
    }
    Ok(out)
}

fn bilinear(img: &Matrix, x: f64, y: f64) -> f64 {
    let (h, w) = (img.rows() as isize, img.cols() as isize);
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let (x0, y0) = (x0 as isize, y0 as isize);
    let px = |xx: isize, yy: isize| {
        if xx >= 0 && yy >= 0 && xx < w && yy < h {
            img.get(yy as usize, xx as usize)
        } else {
            0.0
        }
    };
    if fx == 0.0 && fy == 0.0 {
        return px(x0, y0);
    }
    px(x0, y0) * (1.0 - fx) * (1.0 - fy)
        + px(x0 + 1, y0) * fx * (1.0 - fy)
        + px(x0, y0 + 1) * (1.0 - fx) * fy
        + px(x0 + 1, y0 + 1) * fx * fy
}

/// Samples a distortion from `ranges` and applies it.
pub fn affine_distort<R: Rng + ?Sized>(image: &Matrix, ranges: &AffineRanges, rng: &mut R) -> Result<Matrix> {
    let params = AffineParams::sample(ranges, rng);
    apply_affine(image, &params)
}

/// Distorts every row of a batch of flattened `height × width` images,
/// each with its own random draw.
pub fn affine_batch<R: Rng + ?Sized>(
    x: &Matrix,
    shape: Option<(usize, usize)>,
    ranges: &AffineRanges,
    rng: &mut R,
) -> Result<Matrix> {
    let (h, w) = shape.ok_or_else(|| {
        Error::InvalidConfig("affine augmentation needs an image shape (height, width)".into())
    })?;
    if h * w != x.cols() {
        return Err(Error::InvalidConfig(format!(
            "image shape {h}x{w} does not match {} features",
            x.cols()
        )));
    }
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for r in 0..x.rows() {
        let img = Matrix::from_raw(h, w, x.row(r).to_vec());
        let d = affine_distort(&img, ranges, rng)?;
        out.row_mut(r).copy_from_slice(d.as_slice());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ramp(h: usize, w: usize) -> Matrix {
        let data = (0..h * w).map(|i| ((i * 37) % 11) as f64 / 10.0 - 0.5).collect();
        Matrix::from_vec(h, w, data).unwrap()
    }

    #[test]
    fn identity_is_bit_exact() {
        for (h, w) in [(21, 21), (4, 7), (2, 2)] {
            let mut img = ramp(h, w);
            img.set(0, 1, -0.0);
            let out = apply_affine(&img, &AffineParams::IDENTITY).unwrap();
            let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&out), bits(&img));
        }
    }

    #[test]
    fn degenerate_ranges_sample_identity() {
        let ranges = AffineRanges {
            scale: (1.0, 1.0),
            translate: (0.0, 0.0),
            rotate_deg: (0.0, 0.0),
            shear: (0.0, 0.0),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let img = ramp(5, 6);
        assert_eq!(affine_distort(&img, &ranges, &mut rng).unwrap(), img);
    }

    #[test]
    fn integer_translation_moves_pixel() {
        let mut img = Matrix::zeros(5, 5);
        img.set(2, 1, 0.75);
        let params = AffineParams {
            translate_x: 1.0,
            ..AffineParams::IDENTITY
        };
        let out = apply_affine(&img, &params).unwrap();
        let mut expected = Matrix::zeros(5, 5);
        expected.set(2, 2, 0.75);
        assert_eq!(out, expected);
        let params = AffineParams {
            translate_y: -1.0,
            ..AffineParams::IDENTITY
        };
        let out = apply_affine(&img, &params).unwrap();
        assert_eq!(out.get(1, 1), 0.75);
    }

    #[test]
    fn default_ranges() {
        let r = AffineRanges::default();
        assert_eq!(r.scale, (0.8, 1.2));
        assert_eq!(r.translate, (-0.4, 0.4));
        assert_eq!(r.rotate_deg, (-10.0, 10.0));
        assert_eq!(r.shear, (-0.3, 0.3));
    }

    #[test]
    fn batch_requires_image_shape() {
        let x = Matrix::zeros(2, 9);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let r = AffineRanges::default();
        assert!(matches!(affine_batch(&x, None, &r, &mut rng), Err(Error::InvalidConfig(_))));
        assert!(matches!(affine_batch(&x, Some((2, 4)), &r, &mut rng), Err(Error::InvalidConfig(_))));
        assert_eq!(affine_batch(&x, Some((3, 3)), &r, &mut rng).unwrap().shape(), (2, 9));
    }
}
