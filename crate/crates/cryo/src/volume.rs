//! Volumes and their Fourier transforms.
//!
//! An `n^3` volume is stored `[iz][iy][ix]` with voxel coordinates
//! `p = (ix - c, iy - c, iz - c)`, `c = n/2`. Its Fourier transform is
//! `vhat(k) = n^{-1} sum_p v(p) exp(-i k.p)`: with this scaling the unitary
//! 2D DFT of a projection along z equals the central slice exactly.

use std::f64::consts::PI;

use orbit_core::fft::cfft;
use orbit_core::fft::icfft;
use orbit_core::grid::{center, freq_grid};
use orbit_core::{CTensor, Complex64, RTensor};
use serde::{Deserialize, Serialize};

use crate::error::{CryoError, Result};
use crate::rotation::{Rotation, Vec3};

/// Anything that can be evaluated at continuous frequencies.
pub trait FourierVolume: Sync {
    fn eval(&self, k: Vec3) -> Complex64;

    fn eval_many(&self, ks: &[Vec3]) -> Vec<Complex64> {
        ks.iter().map(|&k| self.eval(k)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianBlob {
    pub weight: f64,
    /// In box units: each coordinate in `[-1/2, 1/2)`.
    pub center: Vec3,
    /// In box units.
    pub stddev: f64,
}

/// `v(p) = sum_i w_i exp(-|p - n c_i|^2 / (2 (n s_i)^2))` in voxel units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianVolumeSpec {
    pub components: Vec<GaussianBlob>,
    /// Grid size the box units are scaled by.
    pub n: usize,
}

impl GaussianVolumeSpec {
    /// Four blobs not lying in a common plane.
    pub fn default_for(n: usize) -> Self {
        let blob = |weight, center, stddev| GaussianBlob { weight, center, stddev };
        Self {
            n,
            components: vec![
                blob(1.0, [0.12, 0.05, -0.08], 0.08),
                blob(0.8, [-0.14, 0.1, 0.06], 0.07),
                blob(0.9, [0.02, -0.15, 0.1], 0.09),
                blob(0.6, [-0.04, 0.02, -0.18], 0.06),
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() || self.n == 0 {
            return Err(CryoError::Invalid("Gaussian volume needs components and n >= 1".into()));
        }
        for c in &self.components {
            if !(c.stddev > 0.0 && c.stddev.is_finite()) {
                return Err(CryoError::Invalid(format!("stddev must be positive, got {}", c.stddev)));
            }
            if !c.weight.is_finite() || c.center.iter().any(|x| !x.is_finite()) {
                return Err(CryoError::Invalid("non-finite Gaussian parameters".into()));
            }
        }
        Ok(())
    }

    /// Value at voxel coordinates `p`.
    pub fn value(&self, p: Vec3) -> f64 {
        let n = self.n as f64;
        self.components
            .iter()
            .map(|c| {
                let s = n * c.stddev;
                let d2: f64 = (0..3).map(|i| (p[i] - n * c.center[i]).powi(2)).sum();
                c.weight * (-d2 / (2.0 * s * s)).exp()
            })
            .sum()
    }

    /// Sample on the `n^3` grid.
    pub fn rasterize(&self) -> Result<RTensor> {
        self.validate()?;
        let n = self.n;
        let c = center(n) as f64;
        let mut data = Vec::with_capacity(n * n * n);
        for iz in 0..n {
            for iy in 0..n {
                for ix in 0..n {
                    data.push(self.value([ix as f64 - c, iy as f64 - c, iz as f64 - c]));
                }
            }
        }
        Ok(RTensor::new(vec![n, n, n], data)?)
    }

    /// Projection along z of the rotated volume `v(R^T p)`, summing z over
    /// `[-extent, extent]` voxels in real space. Independent of any Fourier
    /// machinery; used as an oracle.
    pub fn project(&self, r: &Rotation, extent: usize) -> Vec<f64> {
        let n = self.n;
        let c = center(n) as f64;
        let mut img = vec![0.0; n * n];
        for iy in 0..n {
            for ix in 0..n {
                let (x, y) = (ix as f64 - c, iy as f64 - c);
                img[iy * n + ix] = (-(extent as i64)..=extent as i64).map(|z| self.value(r.apply_t([x, y, z as f64]))).sum();
            }
        }
        img
    }
}

impl FourierVolume for GaussianVolumeSpec {
    /// Continuous transform (the sum over voxels replaced by an integral),
    /// accurate when every blob is wider than about a voxel.
    fn eval(&self, k: Vec3) -> Complex64 {
        let n = self.n as f64;
        let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
        self.components
            .iter()
            .map(|c| {
                let s = n * c.stddev;
                let amp = c.weight * (2.0 * PI * s * s).powf(1.5) * (-0.5 * s * s * k2).exp() / n;
                let phase = -(k[0] * c.center[0] + k[1] * c.center[1] + k[2] * c.center[2]) * n;
                Complex64::from_polar(amp, phase)
            })
            .sum()
    }
}

/// A volume given by its voxel values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridVolume {
    pub n: usize,
    /// `[n, n, n]`, `[iz][iy][ix]`.
    pub values: RTensor,
}

impl GridVolume {
    pub fn new(values: RTensor) -> Result<Self> {
        let s = values.shape();
        if s.len() != 3 || s[0] != s[1] || s[1] != s[2] || s[0] == 0 {
            return Err(CryoError::Shape(format!("volume must be [n, n, n], got {s:?}")));
        }
        values.check_finite()?;
        Ok(Self { n: s[0], values })
    }
}

impl FourierVolume for GridVolume {
    /// Direct trigonometric sum; `O(n^3)` per frequency.
    fn eval(&self, k: Vec3) -> Complex64 {
        let n = self.n;
        let c = center(n) as f64;
        let ex: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, -k[0] * (i as f64 - c))).collect();
        let ey: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, -k[1] * (i as f64 - c))).collect();
        let ez: Vec<Complex64> = (0..n).map(|i| Complex64::from_polar(1.0, -k[2] * (i as f64 - c))).collect();
        let v = self.values.data();
        let mut total = Complex64::default();
        for iz in 0..n {
            for iy in 0..n {
                let row = &v[(iz * n + iy) * n..(iz * n + iy + 1) * n];
                let s: Complex64 = row.iter().zip(&ex).map(|(a, e)| a * e).sum();
                total += s * ey[iy] * ez[iz];
            }
        }
        total / n as f64
    }
}

/// The `n^3` frequency grid `K3`, `[iz][iy][ix]` order.
pub fn freq_grid_3d(n: usize) -> Vec<Vec3> {
    let k = freq_grid(n);
    let mut out = Vec::with_capacity(n * n * n);
    for &kz in &k {
        for &ky in &k {
            for &kx in &k {
                out.push([kx, ky, kz]);
            }
        }
    }
    out
}

/// `vhat` on `K3` for a voxel grid (a scaled centered 3D DFT).
pub fn grid_fourier(values: &RTensor) -> Result<Vec<Complex64>> {
    let n = values.shape()[0];
    let t = cfft(&CTensor::from_real(values), &[0, 1, 2])?;
    let s = (n as f64).sqrt();
    Ok(t.into_data().into_iter().map(|c| c * s).collect())
}

/// Real part of the inverse of [`grid_fourier`].
pub fn grid_from_fourier(vhat: &[Complex64], n: usize) -> Result<RTensor> {
    if vhat.len() != n * n * n {
        return Err(CryoError::Shape(format!("{} coefficients for n = {n}", vhat.len())));
    }
    let s = 1.0 / (n as f64).sqrt();
    let t = CTensor::new(vec![n, n, n], vhat.iter().map(|c| c * s).collect())?;
    Ok(icfft(&t, &[0, 1, 2])?.re())
}

/// Evaluate any volume on `K3` and rasterize it; frequencies outside the
/// ball `|k| <= pi` are dropped when `ball` is set.
pub fn rasterize_fourier(vol: &dyn FourierVolume, n: usize, ball: bool) -> Result<RTensor> {
    let ks = freq_grid_3d(n);
    let mut vhat = vol.eval_many(&ks);
    if ball {
        for (v, k) in vhat.iter_mut().zip(&ks) {
            if k[0] * k[0] + k[1] * k[1] + k[2] * k[2] > PI * PI {
                *v = Complex64::default();
            }
        }
    }
    grid_from_fourier(&vhat, n)
}
