//! MRC2014 density maps (float32 only) and Fourier-crop downsampling.

use std::fs;
use std::path::Path;

use orbit_core::fft::{cfft, icfft};
use orbit_core::{CTensor, RTensor};

use crate::error::{CryoError, Result};

const HEADER: usize = 1024;

/// A map with `x` fastest, stored as `[nz, ny, nx]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MrcMap {
    pub data: RTensor,
    /// Angstrom per voxel along x.
    pub voxel: f64,
}

fn word_i32(h: &[u8], w: usize) -> i32 {
    i32::from_le_bytes(h[4 * w..4 * w + 4].try_into().expect("4 bytes"))
}

fn word_f32(h: &[u8], w: usize) -> f32 {
    f32::from_le_bytes(h[4 * w..4 * w + 4].try_into().expect("4 bytes"))
}

/// Parse an MRC2014 file in mode 2 with standard axis order.
pub fn parse_mrc(bytes: &[u8]) -> Result<MrcMap> {
    if bytes.len() < HEADER {
        return Err(CryoError::Format(format!("MRC file of {} bytes is shorter than its header", bytes.len())));
    }
    let h = &bytes[..HEADER];
    if &h[208..212] != b"MAP " {
        return Err(CryoError::Format("missing MAP tag".into()));
    }
    if h[212] != 0x44 {
        return Err(CryoError::Format("only little-endian MRC files are supported".into()));
    }
    let dims = [word_i32(h, 0), word_i32(h, 1), word_i32(h, 2)];
    if dims.iter().any(|&d| d <= 0) {
        return Err(CryoError::Format(format!("bad dimensions {dims:?}")));
    }
    let mode = word_i32(h, 3);
    if mode != 2 {
        return Err(CryoError::Format(format!("MRC mode {mode} is not supported (need 2, float32)")));
    }
    let order = [word_i32(h, 16), word_i32(h, 17), word_i32(h, 18)];
    if order != [1, 2, 3] {
        return Err(CryoError::Format(format!("axis order {order:?} is not supported (need 1, 2, 3)")));
    }
    let mx = word_i32(h, 7);
    let cella = word_f32(h, 10) as f64;
    let voxel = if mx > 0 && cella > 0.0 { cella / mx as f64 } else { 1.0 };
    let ext = word_i32(h, 23);
    if ext < 0 {
        return Err(CryoError::Format(format!("negative extended header size {ext}")));
    }
    let start = HEADER + ext as usize;
    let [nx, ny, nz] = dims.map(|d| d as usize);
    let count = nx * ny * nz;
    if bytes.len() < start + 4 * count {
        return Err(CryoError::Format(format!("MRC data truncated: need {} bytes, have {}", start + 4 * count, bytes.len())));
    }
    let data = bytes[start..start + 4 * count]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok(MrcMap { data: RTensor::new(vec![nz, ny, nx], data)?, voxel })
}

pub fn read_mrc(path: &Path) -> Result<MrcMap> {
    parse_mrc(&fs::read(path)?)
}

/// Encode a `[nz, ny, nx]` map as MRC2014 mode 2.
pub fn encode_mrc(map: &MrcMap) -> Result<Vec<u8>> {
    let s = map.data.shape();
    if s.len() != 3 {
        return Err(CryoError::Shape(format!("map must be 3D, got {s:?}")));
    }
    let (nz, ny, nx) = (s[0], s[1], s[2]);
    let v = map.data.data();
    let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
    for &x in v {
        lo = lo.min(x);
        hi = hi.max(x);
        sum += x;
    }
    let mean = sum / v.len().max(1) as f64;
    let rms = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len().max(1) as f64).sqrt();
    let mut h = vec![0u8; HEADER];
    let mut put_i = |w: usize, x: i32| h[4 * w..4 * w + 4].copy_from_slice(&x.to_le_bytes());
    for (w, x) in [(0, nx), (1, ny), (2, nz), (7, nx), (8, ny), (9, nz)] {
        put_i(w, x as i32);
    }
    put_i(3, 2);
    put_i(16, 1);
    put_i(17, 2);
    put_i(18, 3);
    put_i(22, 1);
    put_i(27, 20140);
    let mut put_f = |w: usize, x: f64| h[4 * w..4 * w + 4].copy_from_slice(&(x as f32).to_le_bytes());
    for (w, x) in [(10, nx), (11, ny), (12, nz)] {
        put_f(w, x as f64 * map.voxel);
    }
    for w in 13..16 {
        put_f(w, 90.0);
    }
    put_f(19, lo);
    put_f(20, hi);
    put_f(21, mean);
    put_f(54, rms);
    h[208..212].copy_from_slice(b"MAP ");
    h[212..216].copy_from_slice(&[0x44, 0x44, 0, 0]);
    let mut out = h;
    out.reserve(4 * v.len());
    for &x in v {
        out.extend((x as f32).to_le_bytes());
    }
    Ok(out)
}

pub fn write_mrc(path: &Path, map: &MrcMap) -> Result<()> {
    fs::write(path, encode_mrc(map)?)?;
    Ok(())
}

/// Downsample a cubic map to `m^3` by keeping the central `m^3` block of
/// its centered Fourier transform; the box extent is kept, so the voxel
/// size grows by `n / m`.
pub fn fourier_crop(map: &MrcMap, m: usize) -> Result<MrcMap> {
    let s = map.data.shape();
    if s.len() != 3 || s[0] != s[1] || s[1] != s[2] {
        return Err(CryoError::Shape(format!("Fourier cropping needs a cubic map, got {s:?}")));
    }
    let n = s[0];
    if m == 0 || m > n {
        return Err(CryoError::Invalid(format!("cannot crop an n = {n} map to {m}")));
    }
    let f = cfft(&CTensor::from_real(&map.data), &[0, 1, 2])?;
    let off = n / 2 - m / 2;
    let fd = f.data();
    let mut crop = Vec::with_capacity(m * m * m);
    for z in 0..m {
        for y in 0..m {
            for x in 0..m {
                crop.push(fd[((z + off) * n + y + off) * n + x + off]);
            }
        }
    }
    // same function sampled on a coarser grid: values keep their magnitude
    let scale = (m as f64 / n as f64).powf(1.5);
    let small = icfft(&CTensor::new(vec![m, m, m], crop)?, &[0, 1, 2])?.re();
    let data = RTensor::new(vec![m, m, m], small.into_data().into_iter().map(|v| v * scale).collect())?;
    Ok(MrcMap { data, voxel: map.voxel * n as f64 / m as f64 })
}
