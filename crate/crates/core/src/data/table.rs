//! Numeric CSV files without a header row.

use std::path::Path;

use crate::error::{Error, Result};
use crate::eval::LabelSet;
use crate::matrix::Matrix;

use super::Dataset;

/// Reads a rectangular numeric CSV. If `label_column` is given, that column
/// is parsed as non-negative integer class ids and removed from the features.
pub fn load_csv(path: &Path, label_column: Option<usize>) -> Result<Dataset> {
    let origin = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::format(&origin, "open", format!("{other:?}")),
        })?;

    let mut data = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::format(&origin, format!("row {}", row + 1), e.to_string()))?;
        if width.is_some_and(|w| w != rec.len()) {
            return Err(Error::format(
                &origin,
                format!("row {}", row + 1),
                format!("expected {} cells, found {}", width.unwrap(), rec.len()),
            ));
        }
        width = Some(rec.len());
        if let Some(lc) = label_column {
            if lc >= rec.len() {
                return Err(Error::format(
                    &origin,
                    format!("row {}", row + 1),
                    format!("label column {lc} out of range"),
                ));
            }
        }
        for (col, cell) in rec.iter().enumerate() {
            let loc = || format!("row {}, column {}", row + 1, col + 1);
            if Some(col) == label_column {
                let l: usize = cell
                    .parse()
                    .map_err(|_| Error::format(&origin, loc(), format!("label {cell:?} is not a class id")))?;
                labels.push(l);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::format(&origin, loc(), format!("{cell:?} is not a number")))?;
                if !v.is_finite() {
                    return Err(Error::format(&origin, loc(), "non-finite value"));
                }
                data.push(v);
            }
        }
    }
    let width = width.ok_or_else(|| Error::format(&origin, "row 1", "file is empty"))?;
    let cols = width - usize::from(label_column.is_some());
    if cols == 0 {
        return Err(Error::format(&origin, "row 1", "no feature columns"));
    }
    let rows = data.len() / cols;
    let features = Matrix::from_vec(rows, cols, data)?;
    let labels = label_column.map(|_| LabelSet::new(labels));
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Dataset::new(features, labels, name)
}

/// Writes features (and labels as a trailing column, if present). Values use
/// the shortest decimal form that parses back to the same bits.
pub fn save_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path.display().to_string(), "open", format!("{other:?}")),
    })?;
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
    for r in 0..dataset.len() {
        let mut rec: Vec<String> = dataset.features.row(r).iter().map(|v| format!("{v:?}")).collect();
        if let Some(l) = &dataset.labels {
            rec.push(l.labels[r].to_string());
        }
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn labels_column() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "1,2,0\n3,4,1\n").unwrap();
        let ds = load_csv(&p, Some(2)).unwrap();
        assert_eq!(ds.features, Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
        assert_eq!(ds.labels.unwrap().labels, vec![0, 1]);
    }

    #[test]
    fn malformed() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        std::fs::write(&p, "").unwrap();
        assert!(matches!(load_csv(&p, None), Err(Error::Format { .. })));
        std::fs::write(&p, "1,2\n3\n").unwrap();
        match load_csv(&p, None) {
            Err(Error::Format { location, .. }) => assert_eq!(location, "row 2"),
            other => panic!("{other:?}"),
        }
        std::fs::write(&p, "1,2\n3,x\n").unwrap();
        match load_csv(&p, None) {
            Err(Error::Format { location, .. }) => assert_eq!(location, "row 2, column 2"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(load_csv(&dir.path().join("missing.csv"), None), Err(Error::Io { .. })));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data: Vec<f64> = (0..1000 * 50)
            .map(|_| rng.random::<f64>() * 10f64.powi(rng.random_range(-8..8)) - 0.5)
            .collect();
        let ds = Dataset::new(Matrix::from_vec(1000, 50, data).unwrap(), None, "r").unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        save_csv(&ds, &p).unwrap();
        let back = load_csv(&p, None).unwrap();
        let bits = |m: &Matrix| m.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.features), bits(&ds.features));
    }
}
