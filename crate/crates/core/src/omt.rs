//! The OMT1 binary tensor format.
//!
//! Layout (all little-endian): magic `OMT1`, version `u32`, dtype `u32`
//! (0 = f64, 1 = complex128 stored as interleaved re/im pairs), rank `u32`,
//! `rank` extents as `u64`, then the row-major payload. Grid metadata lives
//! in a JSON sidecar next to the tensor file (`<path>.json`).

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde_json::Value;

use crate::error::{CoreError, Result};
use crate::tensor::{CTensor, RTensor};

pub const MAGIC: &[u8; 4] = b"OMT1";
pub const VERSION: u32 = 1;
pub const DTYPE_F64: u32 = 0;
pub const DTYPE_C128: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum OmtTensor {
    Real(RTensor),
    Complex(CTensor),
}

impl OmtTensor {
    pub fn shape(&self) -> &[usize] {
        match self {
            OmtTensor::Real(t) => t.shape(),
            OmtTensor::Complex(t) => t.shape(),
        }
    }

    /// Complex view; real tensors are promoted.
    pub fn into_complex(self) -> CTensor {
        match self {
            OmtTensor::Real(t) => CTensor::from_real(&t),
            OmtTensor::Complex(t) => t,
        }
    }

    /// Real view; fails if any imaginary part is non-zero.
    pub fn into_real(self) -> Result<RTensor> {
        match self {
            OmtTensor::Real(t) => Ok(t),
            OmtTensor::Complex(t) => {
                if t.data().iter().any(|c| c.im != 0.0) {
                    return Err(CoreError::Format("expected a real tensor, found complex values".into()));
                }
                Ok(t.re())
            }
        }
    }
}

pub fn encode(t: &OmtTensor, w: &mut impl Write) -> Result<()> {
    let (dtype, shape) = match t {
        OmtTensor::Real(x) => (DTYPE_F64, x.shape()),
        OmtTensor::Complex(x) => (DTYPE_C128, x.shape()),
    };
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&dtype.to_le_bytes())?;
    w.write_all(&(shape.len() as u32).to_le_bytes())?;
    for &e in shape {
        w.write_all(&(e as u64).to_le_bytes())?;
    }
    let mut buf = Vec::new();
    match t {
        OmtTensor::Real(x) => x.data().iter().for_each(|v| buf.extend_from_slice(&v.to_le_bytes())),
        OmtTensor::Complex(x) => x.data().iter().for_each(|c| {
            buf.extend_from_slice(&c.re.to_le_bytes());
            buf.extend_from_slice(&c.im.to_le_bytes());
        }),
    }
    w.write_all(&buf)?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn decode(r: &mut impl Read) -> Result<OmtTensor> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CoreError::Format(format!("bad magic {:?}", magic)));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(CoreError::Format(format!("unsupported OMT1 version {version}")));
    }
    let dtype = read_u32(r)?;
    let rank = read_u32(r)? as usize;
    if rank > 16 {
        return Err(CoreError::Format(format!("implausible rank {rank}")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u64(r)? as usize);
    }
    let len = shape.iter().try_fold(1usize, |a, &e| a.checked_mul(e));
    let len = len.ok_or_else(|| CoreError::Format("extent product overflows".into()))?;
    let width = match dtype {
        DTYPE_F64 => 1,
        DTYPE_C128 => 2,
        d => return Err(CoreError::Format(format!("unknown dtype code {d}"))),
    };
    let mut bytes = vec![0u8; len * width * 8];
    r.read_exact(&mut bytes)?;
    let vals: Vec<f64> = bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    let t = if dtype == DTYPE_F64 {
        OmtTensor::Real(RTensor::new(shape, vals)?)
    } else {
        let data = vals.chunks_exact(2).map(|p| Complex64::new(p[0], p[1])).collect();
        OmtTensor::Complex(CTensor::new(shape, data)?)
    };
    Ok(t)
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Write a tensor and, if given, its JSON metadata sidecar.
pub fn write(path: &Path, t: &OmtTensor, meta: Option<&Value>) -> Result<()> {
    let mut buf = Vec::new();
    encode(t, &mut buf)?;
    fs::write(path, buf)?;
    if let Some(m) = meta {
        fs::write(sidecar_path(path), serde_json::to_vec_pretty(m)?)?;
    }
    Ok(())
}

pub fn read(path: &Path) -> Result<OmtTensor> {
    let bytes = fs::read(path)?;
    decode(&mut bytes.as_slice())
}

/// Metadata sidecar, or `Value::Null` when absent.
pub fn read_meta(path: &Path) -> Result<Value> {
    let p = sidecar_path(path);
    if !p.exists() {
        return Ok(Value::Null);
    }
    Ok(serde_json::from_slice(&fs::read(p)?)?)
}

pub fn write_complex(path: &Path, t: &CTensor, meta: Option<&Value>) -> Result<()> {
    write(path, &OmtTensor::Complex(t.clone()), meta)
}

pub fn write_real(path: &Path, t: &RTensor, meta: Option<&Value>) -> Result<()> {
    write(path, &OmtTensor::Real(t.clone()), meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn round_trip_both_dtypes() {
        let dir = tempfile::tempdir().unwrap();
        let c = CTensor::new(vec![2, 3], (0..6).map(|i| Complex64::new(i as f64, -0.5 * i as f64)).collect()).unwrap();
        let p = dir.path().join("c.omt");
        write_complex(&p, &c, Some(&json!({"n": 3}))).unwrap();
        assert_eq!(read(&p).unwrap(), OmtTensor::Complex(c));
        assert_eq!(read_meta(&p).unwrap()["n"], 3);

        let r = RTensor::new(vec![4], vec![1.0, -2.0, 3.5, 1e-300]).unwrap();
        let q = dir.path().join("r.omt");
        write_real(&q, &r, None).unwrap();
        assert_eq!(read(&q).unwrap().into_real().unwrap(), r);
        assert_eq!(read_meta(&q).unwrap(), Value::Null);
    }

    #[test]
    fn header_layout() {
        let mut buf = Vec::new();
        encode(&OmtTensor::Real(RTensor::from_vec(vec![1.0])), &mut buf).unwrap();
        assert_eq!(&buf[..4], b"OMT1");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 0);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 1);
        assert_eq!(buf.len(), 16 + 8 + 8);
    }

    #[test]
    fn truncated_and_bad_magic_rejected() {
        let mut buf = Vec::new();
        encode(&OmtTensor::Real(RTensor::from_vec(vec![1.0, 2.0])), &mut buf).unwrap();
        assert!(decode(&mut &buf[..buf.len() - 1]).is_err());
        buf[0] = b'X';
        assert!(decode(&mut buf.as_slice()).is_err());
    }
}
