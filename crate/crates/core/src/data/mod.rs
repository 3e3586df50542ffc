//! Datasets: loaders, writers and synthetic generators.

mod idx;
mod synth;
mod table;

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use idx::{load_idx, write_idx_images, write_idx_labels};
pub use synth::{
    gen_blobs, gen_glyphs, gen_spiral, glyph_templates, spiral_point, BlobParams, SpiralParams, GLYPH_SIZE,
};
pub use table::{load_csv, save_csv};

use crate::container::{self, Tensor};
use crate::error::{Error, Result};
use crate::eval::LabelSet;
use crate::matrix::Matrix;

pub const DATA_MAGIC: &[u8; 12] = b"IMSAT-DATA\0\0";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Option<LabelSet>,
    /// `(height, width)` when rows are flattened images.
    pub image_shape: Option<(usize, usize)>,
    pub name: String,
}

/// Summary of a dataset's shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub n: usize,
    pub d: usize,
    pub has_labels: bool,
    pub image_shape: Option<(usize, usize)>,
    pub dtype: String,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Option<LabelSet>, name: impl Into<String>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != features.rows() {
                return Err(Error::Shape(format!(
                    "{} labels for {} rows",
                    l.len(),
                    features.rows()
                )));
            }
        }
        if !features.is_finite() {
            return Err(Error::InvalidInput("features contain non-finite values".into()));
        }
        Ok(Self {
            features,
            labels,
            image_shape: None,
            name: name.into(),
        })
    }

    pub fn with_image_shape(mut self, h: usize, w: usize) -> Result<Self> {
        if h * w != self.features.cols() {
            return Err(Error::Shape(format!(
                "image shape {h}x{w} does not match {} features",
                self.features.cols()
            )));
        }
        self.image_shape = Some((h, w));
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.features.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.features.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            n: self.len(),
            d: self.dim(),
            has_labels: self.labels.is_some(),
            image_shape: self.image_shape,
            dtype: "f64".into(),
        }
    }

    /// Rows `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: self.labels.as_ref().map(|l| LabelSet {
                labels: l.select(idx),
                classes: l.classes,
            }),
            image_shape: self.image_shape,
            name: self.name.clone(),
        }
    }

    /// SHA-256 over shape, feature bits and labels, as lowercase hex.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.len() as u64).to_le_bytes());
        h.update((self.dim() as u64).to_le_bytes());
        for v in self.features.as_slice() {
            h.update(v.to_le_bytes());
        }
        if let Some(l) = &self.labels {
            for &y in &l.labels {
                h.update((y as u64).to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn to_tensors(&self) -> Vec<Tensor> {
        let (h, w) = self.image_shape.unwrap_or((0, 0));
        let mut t = vec![
            Tensor::vector(
                "header",
                vec![
                    self.len() as f64,
                    self.dim() as f64,
                    f64::from(u8::from(self.labels.is_some())),
                    h as f64,
                    w as f64,
                ],
            ),
            Tensor::vector("name", self.name.bytes().map(f64::from).collect()),
            Tensor::new(
                "features",
                vec![self.len() as u64, self.dim() as u64],
                self.features.as_slice().to_vec(),
            ),
        ];
        if let Some(l) = &self.labels {
            t.push(Tensor::vector("labels", l.labels.iter().map(|&v| v as f64).collect()));
            t.push(Tensor::vector("classes", vec![l.classes as f64]));
        }
        t
    }

    /// Writes the native binary format.
    pub fn save(&self, path: &Path) -> Result<()> {
        container::write_file(path, DATA_MAGIC, &self.to_tensors())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        container::encode(DATA_MAGIC, &self.to_tensors())
    }

    /// Reads the native binary format.
    pub fn load(path: &Path) -> Result<Self> {
        let origin = path.display().to_string();
        let tensors = container::read_file(path, DATA_MAGIC)?;
        Self::from_tensors(&tensors, &origin)
    }

    pub fn from_bytes(bytes: &[u8], origin: &str) -> Result<Self> {
        Self::from_tensors(&container::decode(bytes, DATA_MAGIC, origin)?, origin)
    }

    fn from_tensors(tensors: &[Tensor], origin: &str) -> Result<Self> {
        let bad = |m: &str| Error::format(origin, "tensor table", m.to_string());
        let header = &container::find(tensors, "header", origin)?.data;
        if header.len() != 5 {
            return Err(bad("header must have 5 entries"));
        }
        let as_count = |v: f64| -> Result<usize> {
            if v >= 0.0 && v.fract() == 0.0 && v < 1e15 {
                Ok(v as usize)
            } else {
                Err(bad("header entry is not a count"))
            }
        };
        let (n, d) = (as_count(header[0])?, as_count(header[1])?);
        let (h, w) = (as_count(header[3])?, as_count(header[4])?);
        let feats = container::find(tensors, "features", origin)?;
        if feats.dims != [n as u64, d as u64] {
            return Err(bad("features shape disagrees with header"));
        }
        let features = Matrix::from_vec(n, d, feats.data.clone())
            .map_err(|e| Error::format(origin, "features", e.to_string()))?;
        let name = container::find(tensors, "name", origin)?
            .data
            .iter()
            .map(|&b| b as u8)
            .collect::<Vec<_>>();
        let name = String::from_utf8(name).map_err(|_| bad("name is not UTF-8"))?;
        let labels = if header[2] != 0.0 {
            let l = &container::find(tensors, "labels", origin)?.data;
            if l.len() != n {
                return Err(bad("label count disagrees with header"));
            }
            let ids = l.iter().map(|&v| as_count(v)).collect::<Result<Vec<_>>>()?;
            let classes = as_count(container::find(tensors, "classes", origin)?.data.first().copied().unwrap_or(-1.0))?;
            Some(LabelSet::with_classes(ids, classes).map_err(|e| Error::format(origin, "labels", e.to_string()))?)
        } else {
            None
        };
        let ds = Dataset::new(features, labels, name).map_err(|e| Error::format(origin, "features", e.to_string()))?;
        if h > 0 || w > 0 {
            ds.with_image_shape(h, w)
                .map_err(|e| Error::format(origin, "header", e.to_string()))
        } else {
            Ok(ds)
        }
    }
}

/// Loads `.csv` files with [`load_csv`] and everything else as the native format.
pub fn load_auto(path: &Path, csv_label_column: Option<usize>) -> Result<Dataset> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => load_csv(path, csv_label_column),
        _ => Dataset::load(path),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn native_round_trip() {
        let f = Matrix::from_rows(&[vec![0.1, -2.5, 1e-300, 4.0], vec![3.0, f64::MIN_POSITIVE, 7.0, -0.0]]).unwrap();
        let ds = Dataset::new(f, Some(LabelSet::new(vec![1, 0])), "tiny")
            .unwrap()
            .with_image_shape(2, 2)
            .unwrap();
        let back = Dataset::from_bytes(&ds.to_bytes(), "mem").unwrap();
        assert_eq!(back, ds);
        assert_eq!(back.fingerprint(), ds.fingerprint());
        let unlabeled = Dataset::new(Matrix::zeros(3, 1), None, "").unwrap();
        assert_eq!(Dataset::from_bytes(&unlabeled.to_bytes(), "mem").unwrap(), unlabeled);
    }

    #[test]
    fn label_length_checked() {
        assert!(Dataset::new(Matrix::zeros(3, 1), Some(LabelSet::new(vec![0])), "x").is_err());
    }

    #[test]
    fn fingerprint_sees_labels() {
        let a = Dataset::new(Matrix::zeros(2, 1), Some(LabelSet::new(vec![0, 1])), "x").unwrap();
        let b = Dataset::new(Matrix::zeros(2, 1), Some(LabelSet::new(vec![1, 0])), "x").unwrap();
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_eq!(a.fingerprint().len(), 64);
    }
}
