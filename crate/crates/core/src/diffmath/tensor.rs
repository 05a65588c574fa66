//! Dense real tensors and the LTNS file format.
//!
//! Layout: `b"LTNS"`, `rank: u8`, `rank` little-endian `u32` dims, then the
//! the flat payload as little-endian float32. Element order is the
//! producer's convention; elementwise operations do not depend on it.

use std::fs;
use std::path::Path;

use super::{DiffError, Result};
use crate::util::write_atomic;

pub const LTNS_MAGIC: &[u8; 4] = b"LTNS";

#[derive(Debug, Clone, PartialEq)]
pub struct LatentTensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl LatentTensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.iter().any(|&s| s == 0) {
            return Err(DiffError::InvalidShape(shape));
        }
        let expected: usize = shape.iter().product();
        if data.len() != expected {
            return Err(DiffError::LengthMismatch {
                expected,
                actual: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(DiffError::NonFinite { index: i });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![0.0; n])
    }

    pub fn filled(shape: Vec<usize>, value: f64) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(shape, vec![value; n])
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub(crate) fn ensure_same_shape(&self, other: &LatentTensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(DiffError::ShapeMismatch {
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(())
    }

    pub(crate) fn map2(&self, other: &LatentTensor, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.ensure_same_shape(other)?;
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self {
            shape: self.shape.clone(),
            data,
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(5 + 4 * self.shape.len() + 4 * self.data.len());
        out.extend_from_slice(LTNS_MAGIC);
        out.push(self.shape.len() as u8);
        for &s in &self.shape {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let bad = |offset: usize, reason: String| DiffError::MalformedTensor { offset, reason };
        if bytes.len() < 5 || &bytes[..4] != LTNS_MAGIC {
            return Err(bad(0, "missing LTNS magic".into()));
        }
        let rank = bytes[4] as usize;
        if rank == 0 {
            return Err(bad(4, "rank must be at least 1".into()));
        }
        let head = 5 + 4 * rank;
        if bytes.len() < head {
            return Err(bad(5, format!("header needs {head} bytes, file has {}", bytes.len())));
        }
        let shape: Vec<usize> = bytes[5..head]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]) as usize)
            .collect();
        if shape.iter().any(|&s| s == 0) {
            return Err(bad(5, format!("zero-length dimension in {shape:?}")));
        }
        let expected = shape.iter().product::<usize>() * 4;
        let actual = bytes.len() - head;
        if actual != expected {
            return Err(bad(
                head,
                format!("payload is {actual} bytes, expected {expected}"),
            ));
        }
        let data = bytes[head..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Self::new(shape, data)
    }
}

pub fn load_tensor(path: &Path) -> Result<LatentTensor> {
    let bytes = fs::read(path).map_err(|source| DiffError::Io {
        path: path.display().to_string(),
        source,
    })?;
    LatentTensor::from_bytes(&bytes)
}

pub fn save_tensor(t: &LatentTensor, path: &Path) -> Result<()> {
    write_atomic(path, &t.to_bytes()).map_err(|source| DiffError::Io {
        path: path.display().to_string(),
        source,
    })
}
