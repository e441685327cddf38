//! The VTEN binary tensor file format.
//!
//! Layout: magic `VTEN`, u8 version (1), u8 dtype (0 = f32, 1 = f64),
//! u32 little-endian rank, rank u32 little-endian dims, then the row-major
//! little-endian payload. Descriptors are stored as f32; codebooks and model
//! weights as f64.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"VTEN";
const VERSION: u8 = 1;

/// An n-dimensional tensor with explicit storage precision.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    F32 { dims: Vec<usize>, data: Vec<f32> },
    F64 { dims: Vec<usize>, data: Vec<f64> },
}

impl Tensor {
    pub fn f32(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        check_len(&dims, data.len())?;
        Ok(Tensor::F32 { dims, data })
    }

    pub fn f64(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        check_len(&dims, data.len())?;
        Ok(Tensor::F64 { dims, data })
    }

    /// Builds an f32 tensor from f64 values (the storage convention for
    /// descriptor files).
    pub fn f32_from_f64(dims: Vec<usize>, data: &[f64]) -> Result<Self> {
        check_len(&dims, data.len())?;
        Ok(Tensor::F32 {
            dims,
            data: data.iter().map(|&v| v as f32).collect(),
        })
    }

    pub fn dims(&self) -> &[usize] {
        match self {
            Tensor::F32 { dims, .. } | Tensor::F64 { dims, .. } => dims,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Tensor::F32 { data, .. } => data.len(),
            Tensor::F64 { data, .. } => data.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Payload widened to f64 regardless of storage precision.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Tensor::F32 { data, .. } => data.iter().map(|&v| v as f64).collect(),
            Tensor::F64 { data, .. } => data.clone(),
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&[VERSION])?;
        let (dtype, dims) = match self {
            Tensor::F32 { dims, .. } => (0u8, dims),
            Tensor::F64 { dims, .. } => (1u8, dims),
        };
        w.write_all(&[dtype])?;
        w.write_all(&(dims.len() as u32).to_le_bytes())?;
        for &d in dims {
            if d > u32::MAX as usize {
                return Err(Error::Format(format!("dimension {d} exceeds u32")));
            }
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        match self {
            Tensor::F32 { data, .. } => {
                for v in data {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            Tensor::F64 { data, .. } => {
                for v in data {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, not a VTEN file".into()));
        }
        let mut head = [0u8; 2];
        r.read_exact(&mut head)?;
        if head[0] != VERSION {
            return Err(Error::Format(format!("unsupported VTEN version {}", head[0])));
        }
        let dtype = head[1];
        let mut rank_buf = [0u8; 4];
        r.read_exact(&mut rank_buf)?;
        let rank = u32::from_le_bytes(rank_buf) as usize;
        if rank > 8 {
            return Err(Error::Format(format!("implausible rank {rank}")));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            let mut d = [0u8; 4];
            r.read_exact(&mut d)?;
            dims.push(u32::from_le_bytes(d) as usize);
        }
        let n: usize = dims.iter().product();
        match dtype {
            0 => {
                let mut data = Vec::with_capacity(n);
                let mut buf = [0u8; 4];
                for _ in 0..n {
                    r.read_exact(&mut buf)?;
                    data.push(f32::from_le_bytes(buf));
                }
                Ok(Tensor::F32 { dims, data })
            }
            1 => {
                let mut data = Vec::with_capacity(n);
                let mut buf = [0u8; 8];
                for _ in 0..n {
                    r.read_exact(&mut buf)?;
                    data.push(f64::from_le_bytes(buf));
                }
                Ok(Tensor::F64 { dims, data })
            }
            other => Err(Error::Format(format!("unknown dtype code {other}"))),
        }
    }

    /// Writes atomically: the payload lands in a temp file first and is
    /// renamed into place, so interrupted runs never leave a torn tensor.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = temp_sibling(path);
        {
            let mut f = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
            self.write_to(&mut f)?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

fn check_len(dims: &[usize], len: usize) -> Result<()> {
    let expect: usize = dims.iter().product();
    if expect != len {
        return Err(Error::Shape(format!(
            "tensor payload length {len} != product of dims {dims:?}"
        )));
    }
    Ok(())
}

/// Temp path next to `path` (same filesystem, so rename is atomic).
pub fn temp_sibling(path: &Path) -> std::path::PathBuf {
    let mut name = path
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_else(|| "out".into());
    name.push(".tmp");
    path.with_file_name(name)
}

/// Atomic write of arbitrary bytes (JSON manifests, reports).
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = temp_sibling(path);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_wrong_magic() {
        let mut buf = b"NOPE".to_vec();
        buf.extend_from_slice(&[1, 0, 0, 0, 0, 0]);
        assert!(Tensor::read_from(&mut buf.as_slice()).is_err());
    }

    #[test]
    fn header_layout_is_stable() {
        let t = Tensor::f32(vec![2, 3], vec![0.0; 6]).unwrap();
        let mut buf = Vec::new();
        t.write_to(&mut buf).unwrap();
        assert_eq!(&buf[0..4], b"VTEN");
        assert_eq!(buf[4], 1); // version
        assert_eq!(buf[5], 0); // dtype f32
        assert_eq!(u32::from_le_bytes(buf[6..10].try_into().unwrap()), 2); // rank
        assert_eq!(u32::from_le_bytes(buf[10..14].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[14..18].try_into().unwrap()), 3);
        assert_eq!(buf.len(), 18 + 6 * 4);
    }

    #[test]
    fn save_is_atomic_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.vten");
        let t = Tensor::f64(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        t.save(&path).unwrap();
        assert_eq!(Tensor::load(&path).unwrap(), t);
        assert!(!temp_sibling(&path).exists());
    }

    proptest! {
        // Bit-exact round trip for both dtypes, any rank up to 3.
        #[test]
        fn roundtrip_f32(data in proptest::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), 0..64)) {
            let dims = vec![data.len()];
            let t = Tensor::f32(dims, data).unwrap();
            let mut buf = Vec::new();
            t.write_to(&mut buf).unwrap();
            let back = Tensor::read_from(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back, t);
        }

        #[test]
        fn roundtrip_f64(rows in 1usize..6, cols in 1usize..6, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let data: Vec<f64> = (0..rows * cols).map(|_| rng.gen_range(-1e6..1e6)).collect();
            let t = Tensor::f64(vec![rows, cols], data).unwrap();
            let mut buf = Vec::new();
            t.write_to(&mut buf).unwrap();
            let back = Tensor::read_from(&mut buf.as_slice()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
