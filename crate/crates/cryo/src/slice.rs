//! Central slices, image simulation and empirical image moments.

use orbit_core::fft::CenteredFft2;
use orbit_core::grid::freq_grid;
use orbit_core::reduce::chunked_sum;
use orbit_core::rng::fill_standard_normal;
use orbit_core::tensor::{cdist, cnorm};
use orbit_core::{Complex64, RTensor, SeededRng, Workers};
use orbit_nn::linalg::complex_gram;
use serde::{Deserialize, Serialize};

use crate::error::{CryoError, Result};
use crate::rotation::{sample_rotation_chunk, Rotation, Vec3, VmfMixtureSpec, CHUNK};
use crate::volume::FourierVolume;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    Analytic,
    Quadrature,
    Empirical,
}

/// Moments of `n x n` images in the centered Fourier domain, pixels
/// flattened row-major (`iy * n + ix`).
#[derive(Debug, Clone, PartialEq)]
pub struct CryoMomentPair {
    pub n: usize,
    /// `n^2` entries.
    pub m1: Vec<Complex64>,
    /// `n^2 x n^2`, row-major.
    pub m2: Vec<Complex64>,
    pub kind: MomentKind,
    pub sigma: Option<f64>,
    pub count: Option<u64>,
}

impl CryoMomentPair {
    pub fn hermitian_defect(&self) -> f64 {
        let d = self.m1.len();
        let mut worst: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                worst = worst.max((self.m2[a * d + b] - self.m2[b * d + a].conj()).norm());
            }
        }
        worst
    }

    pub fn check(&self) -> Result<()> {
        let d = self.n * self.n;
        if self.m1.len() != d || self.m2.len() != d * d {
            return Err(CryoError::Shape(format!("moments for n = {} have {} and {} entries", self.n, self.m1.len(), self.m2.len())));
        }
        if self.m1.iter().chain(&self.m2).any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(CryoError::Invalid("moments contain non-finite values".into()));
        }
        Ok(())
    }

    /// `(|m1 - ref.m1| / |ref.m1|, |m2 - ref.m2| / |ref.m2|)`.
    pub fn relative_error(&self, reference: &CryoMomentPair) -> Result<(f64, f64)> {
        if self.m1.len() != reference.m1.len() || self.m2.len() != reference.m2.len() {
            return Err(CryoError::Shape("moment pairs have different sizes".into()));
        }
        let (d1, d2) = (cnorm(&reference.m1), cnorm(&reference.m2));
        if d1 == 0.0 || d2 == 0.0 {
            return Err(CryoError::Invalid("zero-norm reference moment".into()));
        }
        Ok((cdist(&self.m1, &reference.m1) / d1, cdist(&self.m2, &reference.m2) / d2))
    }
}

/// The slice-plane frequencies `R^T (kx, ky, 0)`, row-major over `(ky, kx)`.
pub fn slice_points(r: &Rotation, n: usize) -> Vec<Vec3> {
    let k = freq_grid(n);
    let mut out = Vec::with_capacity(n * n);
    for &ky in &k {
        for &kx in &k {
            out.push(r.apply_t([kx, ky, 0.0]));
        }
    }
    out
}

pub fn slice(vol: &dyn FourierVolume, r: &Rotation, n: usize) -> Vec<Complex64> {
    vol.eval_many(&slice_points(r, n))
}

/// Real part of the inverse centered 2D DFT of a slice.
pub fn image_from_slice(slice: &[Complex64], plan: &mut CenteredFft2) -> Vec<f64> {
    let mut buf = slice.to_vec();
    plan.process(&mut buf);
    buf.iter().map(|c| c.re).collect()
}

/// Centered unitary 2D DFT of a real image.
pub fn image_spectrum(img: &[f64], plan: &mut CenteredFft2) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = img.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    plan.process(&mut buf);
    buf
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma >= 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(CryoError::Invalid(format!("noise level must be >= 0, got {sigma}")))
    }
}

/// Images for one chunk of rotations, noise from stream `chunk`.
fn render(vol: &dyn FourierVolume, rotations: &[Rotation], n: usize, sigma: f64, noise: &SeededRng, chunk: usize) -> Vec<f64> {
    let mut plan = CenteredFft2::new(n, true);
    let mut stream = noise.stream(chunk as u64);
    let mut out = Vec::with_capacity(rotations.len() * n * n);
    let mut eps = vec![0.0; n * n];
    for r in rotations {
        let img = image_from_slice(&slice(vol, r, n), &mut plan);
        fill_standard_normal(&mut stream, &mut eps);
        out.extend(img.iter().zip(&eps).map(|(v, e)| v + sigma * e));
    }
    out
}

fn chunk_images(vol: &dyn FourierVolume, rotations: &[Rotation], n: usize, sigma: f64, noise: &SeededRng, chunk: usize) -> Result<Vec<f64>> {
    let out = render(vol, rotations, n, sigma, noise, chunk);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(CryoError::Numerical("slices have non-finite values".into()));
    }
    Ok(out)
}

/// Noisy projections `[count, n, n]` of `vol` at the given rotations.
pub fn simulate_images(vol: &dyn FourierVolume, rotations: &[Rotation], n: usize, sigma: f64, rng: &SeededRng, workers: &Workers) -> Result<RTensor> {
    check_sigma(sigma)?;
    if rotations.is_empty() {
        return Err(CryoError::Invalid("no rotations".into()));
    }
    let noise = rng.child("noise");
    let parts = workers.map(rotations.len().div_ceil(CHUNK), |ci| {
        let end = ((ci + 1) * CHUNK).min(rotations.len());
        chunk_images(vol, &rotations[ci * CHUNK..end], n, sigma, &noise, ci)
    });
    let mut data = Vec::with_capacity(rotations.len() * n * n);
    for p in parts {
        data.extend(p?);
    }
    Ok(RTensor::new(vec![rotations.len(), n, n], data)?)
}

fn chunk_sums(images: &[f64], n: usize) -> (Vec<f64>, Vec<f64>) {
    let d = n * n;
    let count = images.len() / d;
    let mut plan = CenteredFft2::new(n, false);
    let mut freq = Vec::with_capacity(2 * count * d);
    let mut s1 = vec![0.0; 2 * d];
    for img in images.chunks(d) {
        let f = image_spectrum(img, &mut plan);
        for (i, c) in f.iter().enumerate() {
            s1[2 * i] += c.re;
            s1[2 * i + 1] += c.im;
            freq.extend([c.re, c.im]);
        }
    }
    let mut s2 = vec![0.0; 2 * d * d];
    complex_gram(&freq, count, d, None, &mut s2);
    (s1, s2)
}

fn finish(sums: (Vec<f64>, Vec<f64>), n: usize, count: usize, sigma: f64) -> CryoMomentPair {
    let d = n * n;
    let inv = 1.0 / count as f64;
    let m1 = sums.0.chunks(2).map(|p| Complex64::new(p[0] * inv, p[1] * inv)).collect();
    let raw: Vec<Complex64> = sums.1.chunks(2).map(|p| Complex64::new(p[0] * inv, p[1] * inv)).collect();
    let mut m2 = vec![Complex64::default(); d * d];
    for a in 0..d {
        for b in 0..d {
            m2[a * d + b] = 0.5 * (raw[a * d + b] + raw[b * d + a].conj());
        }
        m2[a * d + a] -= sigma * sigma;
    }
    CryoMomentPair { n, m1, m2, kind: MomentKind::Empirical, sigma: Some(sigma), count: Some(count as u64) }
}

/// `m1 = mean F2 v_j`, `m2 = mean (F2 v_j)(F2 v_j)^* - sigma^2 I`.
pub fn empirical_moments_2d(images: &RTensor, sigma: f64, workers: &Workers) -> Result<CryoMomentPair> {
    check_sigma(sigma)?;
    let s = images.shape();
    if s.len() != 3 || s[0] == 0 || s[1] != s[2] {
        return Err(CryoError::Invalid(format!("need a non-empty [count, n, n] batch, got {s:?}")));
    }
    images.check_finite()?;
    let (count, n) = (s[0], s[1]);
    let d = n * n;
    let data = images.data();
    let sums = chunked_sum(count.div_ceil(CHUNK), workers, |ci| {
        let end = ((ci + 1) * CHUNK).min(count);
        chunk_sums(&data[ci * CHUNK * d..end * d], n)
    })
    .expect("at least one chunk");
    Ok(finish(sums, n, count, sigma))
}

/// Sample rotations from `spec`, simulate and accumulate moments in one pass
/// without storing images. Bit-identical to sampling the rotations,
/// simulating the images and calling [`empirical_moments_2d`] with the same
/// seeds (rotations from `rng.child("rotations")`, noise from
/// `rng.child("noise")`).
pub fn simulate_moments_2d(vol: &dyn FourierVolume, spec: &VmfMixtureSpec, n: usize, count: usize, sigma: f64, rng: &SeededRng, workers: &Workers) -> Result<CryoMomentPair> {
    check_sigma(sigma)?;
    spec.validate()?;
    if count == 0 {
        return Err(CryoError::Invalid("need at least one image".into()));
    }
    let rot_rng = rng.child("rotations");
    let noise = rng.child("noise");
    let sums = chunked_sum(count.div_ceil(CHUNK), workers, |ci| {
        let rotations = sample_rotation_chunk(spec, count, ci, &rot_rng);
        // non-finite slices surface as non-finite sums below
        let images = render(vol, &rotations, n, sigma, &noise, ci);
        chunk_sums(&images, n)
    })
    .expect("at least one chunk");
    if sums.0.iter().chain(&sums.1).any(|v| !v.is_finite()) {
        return Err(CryoError::Numerical("simulated images have non-finite values".into()));
    }
    Ok(finish(sums, n, count, sigma))
}
