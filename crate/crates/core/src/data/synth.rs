//! Synthetic datasets with known labels.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::augment::{affine_distort, AffineRanges};
use crate::error::{Error, Result};
use crate::eval::LabelSet;
use crate::matrix::Matrix;

use super::Dataset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpiralParams {
    pub arcs: usize,
    pub per_arc: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SpiralParams {
    fn default() -> Self {
        Self {
            arcs: 3,
            per_arc: 300,
            noise_std: 0.05,
            seed: 0,
        }
    }
}

/// Noise-free point `j` of arc `a`: angle `φ_j = 2.5π·j/per_arc`, radius
/// `φ/(2.5π)`, rotated by `2πa/arcs`.
pub fn spiral_point(a: usize, j: usize, arcs: usize, per_arc: usize) -> [f64; 2] {
    let phi = 2.5 * PI * j as f64 / per_arc as f64;
    let rho = phi / (2.5 * PI);
    let theta = phi + 2.0 * PI * a as f64 / arcs as f64;
    [rho * theta.cos(), rho * theta.sin()]
}

/// Interleaved spiral arms; label = arm index.
pub fn gen_spiral(p: &SpiralParams) -> Result<Dataset> {
    if p.arcs < 2 || p.per_arc == 0 {
        return Err(Error::InvalidConfig(format!(
            "spiral needs arcs >= 2 and per_arc >= 1, got {} and {}",
            p.arcs, p.per_arc
        )));
    }
    let noise = normal(p.noise_std)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut data = Vec::with_capacity(p.arcs * p.per_arc * 2);
    let mut labels = Vec::with_capacity(p.arcs * p.per_arc);
    for a in 0..p.arcs {
        for j in 0..p.per_arc {
            let [x, y] = spiral_point(a, j, p.arcs, p.per_arc);
            data.push(x + noise.sample(&mut rng));
            data.push(y + noise.sample(&mut rng));
            labels.push(a);
        }
    }
    let features = Matrix::from_vec(p.arcs * p.per_arc, 2, data)?;
    Dataset::new(features, Some(LabelSet::with_classes(labels, p.arcs)?), "spiral")
}

fn normal(std: f64) -> Result<Normal<f64>> {
    if !(std >= 0.0) || !std.is_finite() {
        return Err(Error::InvalidConfig(format!("noise std must be >= 0, got {std}")));
    }
    Normal::new(0.0, std).map_err(|e| Error::InvalidConfig(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlobParams {
    pub k: usize,
    pub per_blob: usize,
    pub dim: usize,
    pub separation: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for BlobParams {
    fn default() -> Self {
        Self {
            k: 4,
            per_blob: 200,
            dim: 2,
            separation: 10.0,
            noise_std: 0.5,
            seed: 0,
        }
    }
}

const CENTER_ATTEMPTS: usize = 10_000;

/// Isotropic Gaussian blobs around centers at least `separation` apart.
/// Centers are drawn uniformly from a cube sized to fit `k` of them.
pub fn gen_blobs(p: &BlobParams) -> Result<Dataset> {
    if p.k == 0 || p.per_blob == 0 || p.dim == 0 {
        return Err(Error::InvalidConfig("blobs need k, per_blob and dim >= 1".into()));
    }
    if !(p.separation > 0.0) || !p.separation.is_finite() {
        return Err(Error::InvalidConfig(format!("separation must be positive, got {}", p.separation)));
    }
    let noise = normal(p.noise_std)?;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let half = p.separation * (p.k as f64).powf(1.0 / p.dim as f64).max(1.0);
    let mut centers: Vec<Vec<f64>> = Vec::with_capacity(p.k);
    let mut attempts = 0;
    while centers.len() < p.k {
        attempts += 1;
        if attempts > CENTER_ATTEMPTS {
            return Err(Error::InvalidConfig(format!(
                "could not place {} centers {} apart in {} dimension(s)",
                p.k, p.separation, p.dim
            )));
        }
        let c: Vec<f64> = (0..p.dim).map(|_| rng.random_range(-half..=half)).collect();
        let far = centers.iter().all(|o| {
            o.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= p.separation
        });
        if far {
            centers.push(c);
        }
    }
    let n = p.k * p.per_blob;
    let mut data = Vec::with_capacity(n * p.dim);
    let mut labels = Vec::with_capacity(n);
    for (b, c) in centers.iter().enumerate() {
        for _ in 0..p.per_blob {
            data.extend(c.iter().map(|m| m + noise.sample(&mut rng)));
            labels.push(b);
        }
    }
    let features = Matrix::from_vec(n, p.dim, data)?;
    Dataset::new(features, Some(LabelSet::with_classes(labels, p.k)?), "blobs")
}

pub const GLYPH_SIZE: usize = 21;

/// Three 21×21 binary templates (ring, plus, wedge) in `{−1, 1}`.
pub fn glyph_templates() -> Vec<Matrix> {
    let s = GLYPH_SIZE;
    let c = (s as f64 - 1.0) / 2.0;
    let draw = |f: &dyn Fn(f64, f64) -> bool| {
        let mut m = Matrix::filled(s, s, -1.0);
        for y in 0..s {
            for x in 0..s {
                if f(x as f64 - c, y as f64 - c) {
                    m.set(y, x, 1.0);
                }
            }
        }
        m
    };
    vec![
        draw(&|x, y| (x.hypot(y) - 6.0).abs() <= 1.2),
        draw(&|x, y| (x.abs() <= 1.2 && y.abs() <= 7.0) || (y.abs() <= 1.2 && x.abs() <= 7.0)),
        draw(&|x, y| {
            let sides = (-7.0..=6.0).contains(&y) && (x.abs() - (y + 7.0) * 0.55).abs() <= 1.2;
            let base = (y - 6.0).abs() <= 1.2 && x.abs() <= 7.5;
            sides || base
        }),
    ]
}

/// `per_template` randomly distorted copies of each glyph template, labeled by template.
pub fn gen_glyphs(per_template: usize, ranges: &AffineRanges, seed: u64) -> Result<Dataset> {
    if per_template == 0 {
        return Err(Error::InvalidConfig("per_template must be at least 1".into()));
    }
    let templates = glyph_templates();
    let d = GLYPH_SIZE * GLYPH_SIZE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::with_capacity(templates.len() * per_template * d);
    let mut labels = Vec::new();
    for (t, img) in templates.iter().enumerate() {
        // Distort in [0, 2] so that the zero padding matches the background.
        let shifted = img.map(|v| v + 1.0);
        for _ in 0..per_template {
            let out = affine_distort(&shifted, ranges, &mut rng)?;
            data.extend(out.as_slice().iter().map(|v| v - 1.0));
            labels.push(t);
        }
    }
    let features = Matrix::from_vec(labels.len(), d, data)?;
    Dataset::new(features, Some(LabelSet::with_classes(labels, templates.len())?), "glyphs")?
        .with_image_shape(GLYPH_SIZE, GLYPH_SIZE)
}
