//! Supervised pairs `(m1, m2) -> (rho, vhat)` drawn from a mixture family.
//!
//! Only the targets are stored; the noise-free input moments are recomputed
//! from them when a batch is assembled, which is cheap next to the network.

use std::f64::consts::PI;

use orbit_core::grid::center;
use orbit_core::{Complex64, SeededRng};

use crate::error::{MraError, Result};
use crate::mixture::MixtureFamily;
use crate::moments::{weighted_moments, MomentPair};
use crate::signal::{rotate, shift_fourier};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    pub rho: Vec<Vec<f64>>,
    pub vhat: Vec<Vec<Complex64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    /// Analytic moments of example `i`.
    pub fn moments(&self, i: usize) -> MomentPair {
        weighted_moments(&self.vhat[i], &self.rho[i])
    }

    /// Split off the last `fraction` of the examples as a test set.
    pub fn split(&self, fraction: f64) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&fraction) {
            return Err(MraError::Invalid(format!("test fraction must be in [0, 1), got {fraction}")));
        }
        let test = ((self.len() as f64) * fraction).round() as usize;
        let cut = self.len() - test;
        let part = |r: std::ops::Range<usize>| Dataset { n: self.n, rho: self.rho[r.clone()].to_vec(), vhat: self.vhat[r].to_vec() };
        Ok((part(0..cut), part(cut..self.len())))
    }
}

/// Circular mean position of a density, in grid steps from the center.
fn circular_mean(rho: &[f64]) -> f64 {
    let n = rho.len() as f64;
    let c = center(rho.len()) as f64;
    let z: Complex64 = rho.iter().enumerate().map(|(j, &r)| Complex64::from_polar(r, 2.0 * PI * (j as f64 - c) / n)).sum();
    z.arg() * n / (2.0 * PI)
}

/// Move `(vhat, rho)` along their joint-shift orbit so that the density's
/// circular mean sits within half a grid step of the center. Moments are
/// unchanged; the encoder then faces one target per input instead of `n`.
pub fn canonicalize(vhat: &[Complex64], rho: &[f64]) -> (Vec<Complex64>, Vec<f64>) {
    let n = rho.len();
    let o = circular_mean(rho).round() as i64;
    (shift_fourier(vhat, o as f64 / n as f64), rotate(rho, -o))
}

/// Draw `count` examples: signal and density are independent samples from
/// `family` on an `n`-point grid, example `i` using RNG stream `i`.
pub fn make_dataset(family: &MixtureFamily, count: usize, n: usize, rng: &SeededRng) -> Result<Dataset> {
    if count == 0 {
        return Err(MraError::Invalid("dataset needs at least one example".into()));
    }
    let mut data = Dataset { n, rho: Vec::with_capacity(count), vhat: Vec::with_capacity(count) };
    for i in 0..count {
        let mut s = rng.stream(i as u64);
        let v = family.sample(&mut s)?.signal(n)?;
        let rho = family.sample(&mut s)?.density(n)?;
        let (vhat, rho) = canonicalize(&v.fourier, &rho.mass);
        data.vhat.push(vhat);
        data.rho.push(rho);
    }
    Ok(data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::relative_error_moments;

    #[test]
    fn canonical_form_keeps_moments() {
        let data = make_dataset(&MixtureFamily::new(2), 20, 11, &SeededRng::new(1, "t")).unwrap();
        let rng = SeededRng::new(1, "t");
        for i in 0..data.len() {
            let mut s = rng.stream(i as u64);
            let v = MixtureFamily::new(2).sample(&mut s).unwrap().signal(11).unwrap();
            let rho = MixtureFamily::new(2).sample(&mut s).unwrap().density(11).unwrap();
            let raw = weighted_moments(&v.fourier, &rho.mass);
            let (e1, e2) = relative_error_moments(&raw, &data.moments(i)).unwrap();
            assert!(e1 < 1e-12 && e2 < 1e-12);
            assert!(circular_mean(&data.rho[i]).abs() <= 0.5 + 1e-9);
        }
    }

    #[test]
    fn split_sizes() {
        let data = make_dataset(&MixtureFamily::new(1), 10, 7, &SeededRng::new(2, "t")).unwrap();
        let (a, b) = data.split(0.2).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert_eq!(b.rho[0], data.rho[8]);
        assert!(data.split(1.0).is_err());
    }
}
