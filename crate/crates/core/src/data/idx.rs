//! IDX files (the MNIST distribution format): big-endian `u32` magic, one
//! big-endian `u32` per dimension, then unsigned bytes.

use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::LabelSet;
use crate::matrix::Matrix;

use super::Dataset;

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

fn be_u32(bytes: &[u8], at: usize, origin: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| Error::format(origin, format!("byte {at}"), "file truncated in header"))
}

/// Returns `(dims, payload offset)` after checking the magic and the payload length.
fn parse_header(bytes: &[u8], magic: u32, origin: &str) -> Result<(Vec<usize>, usize)> {
    let m = be_u32(bytes, 0, origin)?;
    if m != magic {
        return Err(Error::format(
            origin,
            "byte 0",
            format!("bad magic {m:#010x}, expected {magic:#010x}"),
        ));
    }
    let rank = (magic & 0xff) as usize;
    let dims = (0..rank)
        .map(|i| be_u32(bytes, 4 + 4 * i, origin).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    let start = 4 + 4 * rank;
    let need: usize = dims.iter().product();
    if bytes.len() < start + need {
        return Err(Error::format(
            origin,
            format!("byte {}", bytes.len()),
            format!("payload truncated: expected {need} bytes after offset {start}"),
        ));
    }
    Ok((dims, start))
}

/// Loads images (and optionally labels), mapping pixel `v` to `2·v/255 − 1`.
pub fn load_idx(images: &Path, labels: Option<&Path>) -> Result<Dataset> {
    let origin = images.display().to_string();
    let bytes = read(images)?;
    let (dims, start) = parse_header(&bytes, IMAGES_MAGIC, &origin)?;
    let (n, h, w) = (dims[0], dims[1], dims[2]);
    if n == 0 || h * w == 0 {
        return Err(Error::format(&origin, "byte 4", "empty image set"));
    }
    let data = bytes[start..start + n * h * w]
        .iter()
        .map(|&v| 2.0 * f64::from(v) / 255.0 - 1.0)
        .collect();
    let features = Matrix::from_vec(n, h * w, data)?;

    let labels = match labels {
        None => None,
        Some(p) => {
            let lo = p.display().to_string();
            let lb = read(p)?;
            let (ld, ls) = parse_header(&lb, LABELS_MAGIC, &lo)?;
            if ld[0] != n {
                return Err(Error::format(lo, "byte 4", format!("{} labels for {n} images", ld[0])));
            }
            Some(LabelSet::new(lb[ls..ls + n].iter().map(|&v| v as usize).collect()))
        }
    };
    let name = images
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(features, labels, name)?.with_image_shape(h, w)
}

pub fn write_idx_images(path: &Path, h: usize, w: usize, pixels: &[u8]) -> Result<()> {
    if h * w == 0 || !pixels.len().is_multiple_of(h * w) {
        return Err(Error::Shape(format!("{} pixels do not form {h}x{w} images", pixels.len())));
    }
    let n = pixels.len() / (h * w);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, n as u32, h as u32, w as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_scaling() {
        let dir = tempfile::tempdir().unwrap();
        let img = dir.path().join("img.idx");
        let lab = dir.path().join("lab.idx");
        let pixels = [0u8, 255, 128, 7, 1, 2, 3, 4];
        write_idx_images(&img, 2, 2, &pixels).unwrap();
        write_idx_labels(&lab, &[3, 9]).unwrap();
        let ds = load_idx(&img, Some(&lab)).unwrap();
        assert_eq!(ds.features.shape(), (2, 4));
        assert_eq!(ds.image_shape, Some((2, 2)));
        assert_eq!(ds.features.get(0, 0), -1.0);
        assert_eq!(ds.features.get(0, 1), 1.0);
        assert!((ds.features.get(0, 2) - 0.003922).abs() < 1e-6);
        for (i, &p) in pixels.iter().enumerate() {
            assert_eq!(ds.features.as_slice()[i], 2.0 * f64::from(p) / 255.0 - 1.0);
        }
        assert_eq!(ds.labels.unwrap().labels, vec![3, 9]);
    }

    #[test]
    fn bad_magic_and_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.idx");
        std::fs::write(&p, [0, 0, 8, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 5]).unwrap();
        match load_idx(&p, None) {
            Err(Error::Format { location, .. }) => assert_eq!(location, "byte 0"),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, [0, 0, 8, 3, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0, 1, 5]).unwrap();
        match load_idx(&p, None) {
            Err(Error::Format { location, .. }) => assert_eq!(location, "byte 17"),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, [0, 0, 8]).unwrap();
        assert!(matches!(load_idx(&p, None), Err(Error::Format { .. })));
    }
}
