//! Moments of a volume under a discrete rotation distribution on a
//! quadrature set.

use orbit_core::{Complex64, Workers};
use orbit_nn::linalg::complex_gram;

use crate::error::{CryoError, Result};
use crate::rotation::QuadratureSet;
use crate::slice::{slice, CryoMomentPair, MomentKind};
use crate::volume::FourierVolume;

/// Probability masses on the rotations of a quadrature set.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureDensity {
    pub mass: Vec<f64>,
}

impl QuadratureDensity {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() || mass.iter().any(|m| !(*m >= 0.0 && m.is_finite())) {
            return Err(CryoError::Invalid("quadrature masses must be finite and >= 0".into()));
        }
        let s: f64 = mass.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(CryoError::Invalid(format!("quadrature masses sum to {s}, not 1")));
        }
        Ok(Self { mass })
    }

    pub fn uniform(len: usize) -> Self {
        Self { mass: vec![1.0 / len as f64; len] }
    }
}

/// `m1 = sum_j z_j S_j`, `m2 = sum_j z_j S_j S_j^*` with `S_j` the slice of
/// `vol` at rotation `j` of `q`.
pub fn quadrature_moments(vol: &dyn FourierVolume, z_rho: &QuadratureDensity, q: &QuadratureSet, n: usize, workers: &Workers) -> Result<CryoMomentPair> {
    if z_rho.mass.len() != q.len() {
        return Err(CryoError::Shape(format!("{} masses for {} rotations", z_rho.mass.len(), q.len())));
    }
    let d = n * n;
    let slices = workers.map(q.len(), |j| slice(vol, &q.rotations[j], n));
    let mut flat = Vec::with_capacity(2 * q.len() * d);
    for s in &slices {
        flat.extend(s.iter().flat_map(|c| [c.re, c.im]));
    }
    let mut m1 = vec![Complex64::default(); d];
    for (s, &w) in slices.iter().zip(&z_rho.mass) {
        for (a, v) in m1.iter_mut().zip(s) {
            *a += w * v;
        }
    }
    let mut raw = vec![0.0; 2 * d * d];
    complex_gram(&flat, q.len(), d, Some(&z_rho.mass), &mut raw);
    let m2 = raw.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
    Ok(CryoMomentPair { n, m1, m2, kind: MomentKind::Quadrature, sigma: None, count: None })
}
