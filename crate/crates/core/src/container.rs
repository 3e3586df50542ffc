//! Flat binary tensor container shared by model checkpoints and native
//! dataset files.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! [12 bytes magic][u32 version]
//! repeated until EOF:
//!   [u64 name_len][name_len bytes UTF-8 name]
//!   [u64 rank][rank × u64 dims]
//!   [prod(dims) × f64 values]
//! ```

use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<u64>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, dims: Vec<u64>, data: Vec<f64>) -> Self {
        let t = Self {
            name: name.into(),
            dims,
            data,
        };
        debug_assert_eq!(t.numel(), t.data.len());
        t
    }

    pub fn vector(name: impl Into<String>, data: Vec<f64>) -> Self {
        let n = data.len() as u64;
        Self::new(name, vec![n], data)
    }

    pub fn numel(&self) -> usize {
        self.dims.iter().product::<u64>() as usize
    }
}

pub fn write_tensors<W: Write>(mut w: W, magic: &[u8; 12], tensors: &[Tensor]) -> std::io::Result<()> {
    w.write_all(magic)?;
    w.write_all(&VERSION.to_le_bytes())?;
    for t in tensors {
        let name = t.name.as_bytes();
        w.write_all(&(name.len() as u64).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(t.dims.len() as u64).to_le_bytes())?;
        for d in &t.dims {
            w.write_all(&d.to_le_bytes())?;
        }
        for v in &t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()
}

pub fn encode(magic: &[u8; 12], tensors: &[Tensor]) -> Vec<u8> {
    let mut buf = Vec::new();
    write_tensors(&mut buf, magic, tensors).expect("writing to a Vec cannot fail");
    buf
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    origin: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::format(
                self.origin,
                format!("byte {}", self.pos),
                format!("truncated while reading {what}"),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        let b = self.take(8, what)?;
        Ok(u64::from_le_bytes(b.try_into().unwrap()))
    }
}

/// Parses a container. `origin` is used in error messages (usually a path).
pub fn decode(bytes: &[u8], magic: &[u8; 12], origin: &str) -> Result<Vec<Tensor>> {
    let mut cur = Cursor {
        bytes,
        pos: 0,
        origin,
    };
    let head = cur.take(12, "magic")?;
    if head != magic {
        return Err(Error::format(
            origin,
            "byte 0",
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(head),
                String::from_utf8_lossy(magic)
            ),
        ));
    }
    let version = u32::from_le_bytes(cur.take(4, "version")?.try_into().unwrap());
    if version != VERSION {
        return Err(Error::format(origin, "byte 12", format!("unsupported version {version}")));
    }

    let mut out = Vec::new();
    while cur.pos < bytes.len() {
        let start = cur.pos;
        let name_len = cur.u64("name length")? as usize;
        let name = std::str::from_utf8(cur.take(name_len, "name")?)
            .map_err(|_| Error::format(origin, format!("byte {}", start + 8), "name is not UTF-8"))?
            .to_owned();
        let rank = cur.u64("rank")? as usize;
        if rank > 8 {
            return Err(Error::format(origin, format!("byte {}", cur.pos - 8), format!("implausible rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(cur.u64("dims")?);
        }
        let numel = dims
            .iter()
            .try_fold(1u64, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n.checked_mul(8).is_some_and(|b| b <= (bytes.len() - cur.pos) as u64))
            .ok_or_else(|| {
                Error::format(origin, format!("byte {}", cur.pos), format!("tensor '{name}' payload truncated"))
            })? as usize;
        let raw = cur.take(numel * 8, "payload")?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(Tensor { name, dims, data });
    }
    Ok(out)
}

pub fn read_file(path: &std::path::Path, magic: &[u8; 12]) -> Result<Vec<Tensor>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode(&bytes, magic, &path.display().to_string())
}

pub fn write_file(path: &std::path::Path, magic: &[u8; 12], tensors: &[Tensor]) -> Result<()> {
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_tensors(std::io::BufWriter::new(f), magic, tensors).map_err(|e| Error::io(path, e))
}

/// Looks up a tensor by name.
pub fn find<'a>(tensors: &'a [Tensor], name: &str, origin: &str) -> Result<&'a Tensor> {
    tensors
        .iter()
        .find(|t| t.name == name)
        .ok_or_else(|| Error::format(origin, "tensor table", format!("missing tensor '{name}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MAGIC: &[u8; 12] = b"TEST-CONTAIN";

    #[test]
    fn header_is_sixteen_bytes() {
        let bytes = encode(MAGIC, &[]);
        assert_eq!(bytes.len(), HEADER_LEN);
        assert_eq!(&bytes[..12], MAGIC);
        assert_eq!(&bytes[12..], &1u32.to_le_bytes());
    }

    #[test]
    fn round_trip_preserves_bits() {
        let ts = vec![
            Tensor::new("w", vec![2, 3], vec![1.0, -0.0, f64::MIN_POSITIVE, 1e300, -3.5, 0.1]),
            Tensor::vector("ünï", vec![]),
        ];
        let back = decode(&encode(MAGIC, &ts), MAGIC, "mem").unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in ts.iter().zip(&back) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.dims, b.dims);
            let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
            assert_eq!(bits(&a.data), bits(&b.data));
        }
    }

    #[test]
    fn truncation_and_magic_errors_report_offsets() {
        let bytes = encode(MAGIC, &[Tensor::vector("x", vec![1.0, 2.0])]);
        let err = decode(&bytes[..bytes.len() - 3], MAGIC, "mem").unwrap_err();
        assert!(matches!(err, Error::Format { .. }), "{err}");
        let err = decode(&bytes, b"OTHER-MAGIC!", "mem").unwrap_err();
        match err {
            Error::Format { location, .. } => assert_eq!(location, "byte 0"),
            other => panic!("{other}"),
        }
    }
}
