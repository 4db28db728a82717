//! Dense row-major f32 tensors and the `.pdbt` file format.
//!
//! The on-disk layout is little-endian throughout:
//!
//! ```text
//! magic "PDBT" (4 bytes) | version u32 | rank u32 | dims u32 x rank | payload f32 x prod(dims)
//! ```
//!
//! Round-trips are bit-exact; readers reject anything that is not a
//! well-formed file (bad magic, unknown version, dims overflow, size
//! mismatch, non-finite payload values).

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"PDBT";
const VERSION: u32 = 1;
const MAX_RANK: usize = 8;

/// Dense row-major tensor of f32 values (last index varies fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    /// Zero-filled tensor. Every extent must be positive.
    pub fn zeros(dims: &[usize]) -> Result<Tensor> {
        let n = checked_len(dims)?;
        Ok(Tensor {
            dims: dims.to_vec(),
            data: vec![0.0; n],
        })
    }

    /// Wraps an existing buffer. The buffer length must equal the product of
    /// the extents and all values must be finite.
    pub fn from_vec(dims: &[usize], data: Vec<f32>) -> Result<Tensor> {
        let n = checked_len(dims)?;
        if data.len() != n {
            return Err(Error::shape(
                "tensor buffer",
                format!("{} values for dims {:?}", n, dims),
                data.len().to_string(),
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(
                "tensor data",
                format!("non-finite value {} at flat index {}", data[i], i),
            ));
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data,
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    /// Extent of axis `axis`. Panics if the axis does not exist.
    pub fn dim(&self, axis: usize) -> usize {
        self.dims[axis]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    /// Flat offset of a multi-index. Panics on rank or bounds violations;
    /// indexing mistakes are programming errors, not recoverable conditions.
    pub fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(
            index.len(),
            self.dims.len(),
            "index rank {} does not match tensor rank {}",
            index.len(),
            self.dims.len()
        );
        let mut flat = 0;
        for (axis, (&i, &d)) in index.iter().zip(&self.dims).enumerate() {
            assert!(
                i < d,
                "index {} out of bounds for axis {} with extent {}",
                i,
                axis,
                d
            );
            flat = flat * d + i;
        }
        flat
    }

    pub fn at(&self, index: &[usize]) -> f32 {
        self.data[self.offset(index)]
    }

    pub fn at_mut(&mut self, index: &[usize]) -> &mut f32 {
        let o = self.offset(index);
        &mut self.data[o]
    }
}

fn checked_len(dims: &[usize]) -> Result<usize> {
    if dims.is_empty() {
        return Err(Error::invalid("tensor dims", "rank must be at least 1"));
    }
    if dims.len() > MAX_RANK {
        return Err(Error::invalid(
            "tensor dims",
            format!("rank {} exceeds the maximum of {}", dims.len(), MAX_RANK),
        ));
    }
    let mut n: usize = 1;
    for &d in dims {
        if d == 0 {
            return Err(Error::invalid("tensor dims", "zero extent"));
        }
        n = n.checked_mul(d).ok_or_else(|| {
            Error::invalid(
                "tensor dims",
                format!("element count overflows: {:?}", dims),
            )
        })?;
    }
    Ok(n)
}

/// Serializes a tensor to `path`. The file appears atomically: data is
/// written to a sibling temporary file first and renamed into place, so a
/// failed write never leaves a partial output behind.
pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    let mut buf = Vec::with_capacity(12 + 4 * t.rank() + 4 * t.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &d in t.dims() {
        let d = u32::try_from(d)
            .map_err(|_| Error::invalid("tensor dims", format!("extent {} exceeds u32", d)))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }

    let tmp = path.with_extension("pdbt.tmp");
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    fs::write(&tmp, &buf).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        io_err(e)
    })
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let fail = |what: String| Error::Format {
        path: path.to_path_buf(),
        what,
    };

    if bytes.len() < 12 {
        return Err(fail(format!(
            "file too short for a header: {} bytes",
            bytes.len()
        )));
    }
    if &bytes[0..4] != MAGIC {
        return Err(fail(format!(
            "bad magic {:?}, expected {:?}",
            &bytes[0..4],
            MAGIC
        )));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(fail(format!("unsupported version {}", version)));
    }
    let rank = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if rank == 0 || rank > MAX_RANK {
        return Err(fail(format!("rank {} outside 1..={}", rank, MAX_RANK)));
    }
    let header_len = 12 + 4 * rank;
    if bytes.len() < header_len {
        return Err(fail("truncated dims header".to_string()));
    }
    let mut dims = Vec::with_capacity(rank);
    let mut n: usize = 1;
    for i in 0..rank {
        let off = 12 + 4 * i;
        let d = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
        if d == 0 {
            return Err(fail(format!("zero extent at axis {}", i)));
        }
        n = n
            .checked_mul(d)
            .ok_or_else(|| fail(format!("dims overflow: extent {} at axis {}", d, i)))?;
        dims.push(d);
    }
    let expected = header_len
        .checked_add(
            n.checked_mul(4)
                .ok_or_else(|| fail("payload size overflows".to_string()))?,
        )
        .ok_or_else(|| fail("payload size overflows".to_string()))?;
    if bytes.len() < expected {
        return Err(fail(format!(
            "truncated payload: dims {:?} need {} bytes, file has {}",
            dims,
            expected,
            bytes.len()
        )));
    }
    if bytes.len() > expected {
        return Err(fail(format!(
            "{} trailing bytes after payload",
            bytes.len() - expected
        )));
    }

    let mut data = Vec::with_capacity(n);
    for i in 0..n {
        let off = header_len + 4 * i;
        let v = f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap());
        if !v.is_finite() {
            return Err(fail(format!("non-finite value {} at flat index {}", v, i)));
        }
        data.push(v);
    }
    Ok(Tensor { dims, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    fn consecutive(dims: &[usize]) -> Tensor {
        let n: usize = dims.iter().product();
        Tensor::from_vec(dims, (0..n).map(|i| i as f32 * 0.5 - 3.0).collect()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("t.pdbt");
        let t = consecutive(&[3, 4, 5]);
        write_tensor(&path, &t).unwrap();
        let back = read_tensor(&path).unwrap();
        assert_eq!(back.dims(), t.dims());
        for (a, b) in t.data().iter().zip(back.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn round_trip_preserves_negative_zero() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("z.pdbt");
        let t = Tensor::from_vec(&[2], vec![-0.0, 1.0e-38]).unwrap();
        write_tensor(&path, &t).unwrap();
        let back = read_tensor(&path).unwrap();
        assert_eq!(back.data()[0].to_bits(), (-0.0f32).to_bits());
        assert_eq!(back.data()[1].to_bits(), 1.0e-38f32.to_bits());
    }

    #[test]
    fn rejects_bad_magic() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.pdbt");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"XXXX");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        let err = read_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("magic"), "{}", err);
    }

    #[test]
    fn rejects_unknown_version() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("v.pdbt");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        let err = read_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("version"), "{}", err);
    }

    #[test]
    fn rejects_payload_shorter_than_header_claims() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("short.pdbt");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&2u32.to_le_bytes());
        bytes.extend_from_slice(&3u32.to_le_bytes());
        for _ in 0..4 {
            bytes.extend_from_slice(&1.0f32.to_le_bytes());
        }
        std::fs::write(&path, &bytes).unwrap();
        let err = read_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("truncated"), "{}", err);
    }

    #[test]
    fn rejects_trailing_bytes() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("long.pdbt");
        let t = consecutive(&[2, 2]);
        write_tensor(&path, &t).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.push(0);
        std::fs::write(&path, &bytes).unwrap();
        let err = read_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("trailing"), "{}", err);
    }

    #[test]
    fn rejects_dims_overflow() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("ovf.pdbt");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&8u32.to_le_bytes());
        for _ in 0..8 {
            bytes.extend_from_slice(&u32::MAX.to_le_bytes());
        }
        std::fs::write(&path, &bytes).unwrap();
        let err = read_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("overflow"), "{}", err);
    }

    #[test]
    fn rejects_non_finite_payload() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("nan.pdbt");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MAGIC);
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        let err = read_tensor(&path).unwrap_err();
        assert!(err.to_string().contains("non-finite"), "{}", err);
    }

    #[test]
    fn from_vec_checks_length_and_extents() {
        assert!(Tensor::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::from_vec(&[2, 0], vec![]).is_err());
        assert!(Tensor::from_vec(&[1], vec![f32::INFINITY]).is_err());
        assert!(Tensor::zeros(&[]).is_err());
    }

    #[test]
    fn offset_is_row_major() {
        let t = consecutive(&[2, 3, 4]);
        assert_eq!(t.offset(&[0, 0, 0]), 0);
        assert_eq!(t.offset(&[0, 0, 3]), 3);
        assert_eq!(t.offset(&[0, 1, 0]), 4);
        assert_eq!(t.offset(&[1, 0, 0]), 12);
        assert_eq!(t.offset(&[1, 2, 3]), 23);
    }

    #[test]
    #[should_panic(expected = "out of bounds")]
    fn offset_panics_out_of_bounds() {
        let t = consecutive(&[2, 2]);
        t.at(&[2, 0]);
    }
}
