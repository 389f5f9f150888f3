use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// Regular grid of scalars, x fastest. Stored as `f64` so that dense
/// reconstructions keep the exact network outputs; the raw file format is
/// little-endian `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarVolume {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl ScalarVolume {
    pub fn new(dims: [usize; 3], data: Vec<f64>) -> Result<Self> {
        let n = dims.iter().product::<usize>();
        if data.len() != n {
            return Err(Error::DimensionMismatch {
                context: "volume data",
                expected: n,
                actual: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "volume value at linear index {i} is not finite"
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 3], mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(dims.iter().product());
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    data.push(f(i, j, k));
                }
            }
        }
        Self::new(dims, data)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn read_raw(path: impl AsRef<Path>, dims: [usize; 3]) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let n = dims.iter().product::<usize>();
        if bytes.len() != n * 4 {
            return Err(Error::Validation(format!(
                "{}: expected {} bytes for {}x{}x{} f32 values, found {}",
                path.display(),
                n * 4,
                dims[0],
                dims[1],
                dims[2],
                bytes.len()
            )));
        }
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Self::new(dims, data)
    }

    pub fn write_raw(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut bytes = Vec::with_capacity(self.data.len() * 4);
        for &v in &self.data {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip_through_f32() {
        let vol = ScalarVolume::from_fn([3, 2, 2], |i, j, k| (i + 10 * j + 100 * k) as f64 * 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.raw");
        vol.write_raw(&path).unwrap();
        assert_eq!(ScalarVolume::read_raw(&path, [3, 2, 2]).unwrap(), vol);
        assert!(ScalarVolume::read_raw(&path, [3, 3, 2]).is_err());
    }

    #[test]
    fn rejects_non_finite_and_wrong_length() {
        assert!(ScalarVolume::new([2, 1, 1], vec![0.0, f64::NAN]).is_err());
        assert!(ScalarVolume::new([2, 1, 1], vec![0.0]).is_err());
    }

    #[test]
    fn x_fastest_indexing() {
        let vol = ScalarVolume::from_fn([2, 3, 4], |i, j, k| (i + 2 * j + 6 * k) as f64).unwrap();
        for (n, v) in vol.data().iter().enumerate() {
            assert_eq!(*v, n as f64);
        }
        assert_eq!(vol.get(1, 2, 3), 23.0);
    }
}
