//! Volume comparison: rotation, brute-force alignment up to rotation,
//! reflection and integer translation, Fourier shell correlation and
//! resolution.

use orbit_core::fft::{fft, ifft};
use orbit_core::grid::center;
use orbit_core::tensor::{rdist, rnorm};
use orbit_core::{CTensor, RTensor, Workers};
use serde::{Deserialize, Serialize};

use crate::error::{CryoError, Result};
use crate::rotation::{quadrature, Rotation, Vec3};
use crate::volume::grid_fourier;

fn cube_n(v: &RTensor) -> Result<usize> {
    let s = v.shape();
    if s.len() != 3 || s[0] != s[1] || s[1] != s[2] || s[0] == 0 {
        return Err(CryoError::Shape(format!("volume must be [n, n, n], got {s:?}")));
    }
    Ok(s[0])
}

fn same_n(u: &RTensor, v: &RTensor) -> Result<usize> {
    let n = cube_n(u)?;
    if cube_n(v)? != n {
        return Err(CryoError::Shape(format!("volumes differ in size: {:?} vs {:?}", u.shape(), v.shape())));
    }
    Ok(n)
}

/// Trilinear sample at voxel coordinates (relative to the center); zero
/// outside the grid.
fn sample(v: &[f64], n: usize, p: Vec3) -> f64 {
    let c = center(n) as f64;
    let g = [p[0] + c, p[1] + c, p[2] + c];
    let base = g.map(|x| x.floor());
    let frac = [g[0] - base[0], g[1] - base[1], g[2] - base[2]];
    let mut acc = 0.0;
    for corner in 0..8 {
        let mut w = 1.0;
        let mut idx = [0usize; 3];
        let mut inside = true;
        for a in 0..3 {
            let hi = (corner >> a) & 1 == 1;
            w *= if hi { frac[a] } else { 1.0 - frac[a] };
            let i = base[a] as i64 + hi as i64;
            if i < 0 || i >= n as i64 {
                inside = false;
            }
            idx[a] = i as usize;
        }
        if inside && w != 0.0 {
            acc += w * v[(idx[2] * n + idx[1]) * n + idx[0]];
        }
    }
    acc
}

/// `(R v)(p) = v(R^T p)` by trilinear interpolation about the grid center.
pub fn rotate_volume(v: &RTensor, r: &Rotation) -> Result<RTensor> {
    let n = cube_n(v)?;
    let c = center(n) as f64;
    let src = v.data();
    let mut out = Vec::with_capacity(n * n * n);
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                out.push(sample(src, n, r.apply_t([ix as f64 - c, iy as f64 - c, iz as f64 - c])));
            }
        }
    }
    Ok(RTensor::new(vec![n, n, n], out)?)
}

/// Point reflection `v(-p)` about the grid center (voxels mirrored outside
/// the grid are zero).
pub fn reflect_volume(v: &RTensor) -> Result<RTensor> {
    let n = cube_n(v)?;
    let c = center(n) as i64;
    let src = v.data();
    let mut out = vec![0.0; n * n * n];
    let mirror = |i: usize| -> Option<usize> {
        let j = 2 * c - i as i64;
        (0..n as i64).contains(&j).then_some(j as usize)
    };
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                if let (Some(x), Some(y), Some(z)) = (mirror(ix), mirror(iy), mirror(iz)) {
                    out[(iz * n + iy) * n + ix] = src[(z * n + y) * n + x];
                }
            }
        }
    }
    Ok(RTensor::new(vec![n, n, n], out)?)
}

/// Circular shift by whole voxels: `out(p) = v(p - s)`.
pub fn shift_volume(v: &RTensor, s: [i64; 3]) -> Result<RTensor> {
    let n = cube_n(v)?;
    let src = v.data();
    let m = n as i64;
    let idx = |i: usize, a: usize| (i as i64 - s[a]).rem_euclid(m) as usize;
    let mut out = Vec::with_capacity(n * n * n);
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                out.push(src[(idx(iz, 2) * n + idx(iy, 1)) * n + idx(ix, 0)]);
            }
        }
    }
    Ok(RTensor::new(vec![n, n, n], out)?)
}

/// `|u - v| / |v|`.
pub fn relative_error_volume(u: &RTensor, v: &RTensor) -> Result<f64> {
    same_n(u, v)?;
    let d = rnorm(v.data());
    if d == 0.0 {
        return Err(CryoError::Invalid("reference volume is zero".into()));
    }
    Ok(rdist(u.data(), v.data()) / d)
}

/// The circular shift `s` maximizing `sum_p u(p) w(p - s)`.
fn best_shift(u: &RTensor, w: &RTensor) -> Result<[i64; 3]> {
    let n = cube_n(u)?;
    let fu = fft(&CTensor::from_real(u), &[0, 1, 2])?;
    let fw = fft(&CTensor::from_real(w), &[0, 1, 2])?;
    let prod: Vec<_> = fu.data().iter().zip(fw.data()).map(|(a, b)| a * b.conj()).collect();
    let corr = ifft(&CTensor::new(vec![n, n, n], prod)?, &[0, 1, 2])?;
    let mut best = (f64::NEG_INFINITY, 0);
    for (i, c) in corr.data().iter().enumerate() {
        if c.re > best.0 {
            best = (c.re, i);
        }
    }
    let i = best.1;
    let signed = |k: usize| if k > n / 2 { k as i64 - n as i64 } else { k as i64 };
    Ok([signed(i % n), signed((i / n) % n), signed(i / (n * n))])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlignOptions {
    /// Search over `v(-p)` as well.
    pub reflect: bool,
    /// Search over integer circular translations.
    pub shift: bool,
    /// Coordinate-descent refinement around the best grid rotation.
    pub refine: bool,
}

impl Default for AlignOptions {
    fn default() -> Self {
        Self { reflect: true, shift: true, refine: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub rotation: Rotation,
    pub reflected: bool,
    pub shift: [i64; 3],
    /// `|T v - u| / |u|` for the returned transform `T`.
    pub error: f64,
}

impl Alignment {
    /// Apply the transform to `v`: reflect, rotate, then shift.
    pub fn apply(&self, v: &RTensor) -> Result<RTensor> {
        let base = if self.reflected { reflect_volume(v)? } else { v.clone() };
        shift_volume(&rotate_volume(&base, &self.rotation)?, self.shift)
    }
}

/// The default search grid: the 100-direction design with 12 in-plane
/// angles (1200 rotations).
pub fn default_search_grid() -> Vec<Rotation> {
    quadrature(100, 12).expect("embedded design").rotations
}

fn score(u: &RTensor, base: &RTensor, r: &Rotation, shift: bool) -> Result<([i64; 3], f64)> {
    let w = rotate_volume(base, r)?;
    let s = if shift { best_shift(u, &w)? } else { [0; 3] };
    let d = rdist(shift_volume(&w, s)?.data(), u.data());
    Ok((s, d))
}

/// The transform of `v` closest to `u` in Frobenius norm over the identity
/// and `search` (and reflections and shifts when enabled), followed by a
/// local coordinate search with shrinking steps when `refine` is set.
pub fn align_volumes(u: &RTensor, v: &RTensor, search: &[Rotation], opts: AlignOptions, workers: &Workers) -> Result<Alignment> {
    same_n(u, v)?;
    if search.is_empty() {
        return Err(CryoError::Invalid("empty rotation search grid".into()));
    }
    let un = rnorm(u.data());
    if un == 0.0 {
        return Err(CryoError::Invalid("reference volume is zero".into()));
    }
    let mut bases = vec![(false, v.clone())];
    if opts.reflect {
        bases.push((true, reflect_volume(v)?));
    }
    let mut candidates = Vec::with_capacity(search.len() + 1);
    candidates.push(Rotation::IDENTITY);
    candidates.extend_from_slice(search);
    let search = &candidates;
    let mut best: Option<(f64, Alignment)> = None;
    for (reflected, base) in &bases {
        let scores = workers.map(search.len(), |i| score(u, base, &search[i], opts.shift));
        for (r, s) in search.iter().zip(scores) {
            let (shift, d) = s?;
            if best.as_ref().is_none_or(|b| d < b.0) {
                best = Some((d, Alignment { rotation: *r, reflected: *reflected, shift, error: d / un }));
            }
        }
    }
    let (mut d, mut a) = best.expect("nonempty search");
    if opts.refine {
        let base = if a.reflected { bases[1].1.clone() } else { v.clone() };
        let axes: [Vec3; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let mut step = 8f64.to_radians();
        while step > 0.2f64.to_radians() {
            let mut improved = true;
            while improved {
                improved = false;
                for axis in axes {
                    for sign in [1.0, -1.0] {
                        let r = Rotation::axis_angle(axis, sign * step).mul(&a.rotation);
                        let (shift, e) = score(u, &base, &r, opts.shift)?;
                        if e < d {
                            d = e;
                            a = Alignment { rotation: r, reflected: a.reflected, shift, error: e / un };
                            improved = true;
                        }
                    }
                }
            }
            step *= 0.5;
        }
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FscCurve {
    /// Shell radius in integer frequency units (0 ..= n/2).
    pub radii: Vec<usize>,
    pub values: Vec<f64>,
    /// Voxel size in Angstrom.
    pub voxel: f64,
    pub n: usize,
}

/// Fourier shell correlation with shells `round(|m|)` over integer
/// frequencies `m`; shells past `n/2` are not reported. A shell where
/// either volume vanishes has correlation 0.
pub fn fsc(u: &RTensor, v: &RTensor, voxel: f64) -> Result<FscCurve> {
    let n = same_n(u, v)?;
    let fu = grid_fourier(u)?;
    let fv = grid_fourier(v)?;
    let c = center(n) as i64;
    let shells = n / 2 + 1;
    let (mut num, mut du, mut dv) = (vec![0.0; shells], vec![0.0; shells], vec![0.0; shells]);
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                let m2 = [ix, iy, iz].iter().map(|&i| (i as i64 - c).pow(2)).sum::<i64>();
                let r = (m2 as f64).sqrt().round() as usize;
                if r >= shells {
                    continue;
                }
                let i = (iz * n + iy) * n + ix;
                num[r] += (fu[i] * fv[i].conj()).re;
                du[r] += fu[i].norm_sqr();
                dv[r] += fv[i].norm_sqr();
            }
        }
    }
    let values = (0..shells)
        .map(|r| {
            let d = (du[r] * dv[r]).sqrt();
            if d > 0.0 {
                (num[r] / d).clamp(-1.0, 1.0)
            } else {
                0.0
            }
        })
        .collect();
    Ok(FscCurve { radii: (0..shells).collect(), values, voxel, n })
}

impl FscCurve {
    /// Resolution in Angstrom at the `threshold` crossing: `n voxel / r*`
    /// with `r*` linearly interpolated between the last shell above and
    /// the first shell below. Nyquist (`2 voxel`) when the curve never
    /// drops below the threshold.
    pub fn resolution(&self, threshold: f64) -> f64 {
        for r in 1..self.values.len() {
            if self.values[r] < threshold {
                let (a, b) = (self.values[r - 1], self.values[r]);
                let t = if a > b { (a - threshold) / (a - b) } else { 0.0 };
                let rstar = (r - 1) as f64 + t.clamp(0.0, 1.0);
                if rstar <= 0.0 {
                    return f64::INFINITY;
                }
                return (self.n as f64 * self.voxel / rstar).max(2.0 * self.voxel);
            }
        }
        2.0 * self.voxel
    }
}
