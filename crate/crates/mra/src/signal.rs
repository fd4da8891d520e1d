//! Periodic signals on the centered grid and their shifts.
//!
//! Index `i` of an `n`-point signal sits at `x_i = (i - c) / n` with
//! `c = n / 2`, frequency index `a` at `k_a = 2 pi (a - c) / n`, and
//! `vhat(k) = n^{-1/2} sum_i v_i exp(-i k (i - c))`. Shifting by `s` maps
//! `vhat(k)` to `exp(-i k n s) vhat(k)`, so a shift of `1/n` moves every
//! sample one grid point to the right.

use orbit_core::fft::AxisFft;
use orbit_core::grid::{center, freq_grid};
use orbit_core::Complex64;

use crate::error::{MraError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MraSignal {
    pub n: usize,
    pub values: Vec<f64>,
    pub fourier: Vec<Complex64>,
}

impl MraSignal {
    pub fn from_real(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(MraError::Invalid("signal has non-finite values".into()));
        }
        let fourier = dft(&values);
        Ok(Self { n: values.len(), values, fourier })
    }

    /// Build from Fourier coefficients; `values` holds the real part of the
    /// inverse transform.
    pub fn from_fourier(fourier: Vec<Complex64>) -> Result<Self> {
        if fourier.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(MraError::Invalid("signal has non-finite coefficients".into()));
        }
        let values = idft(&fourier).into_iter().map(|c| c.re).collect();
        Ok(Self { n: fourier.len(), values, fourier })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MraDensity {
    pub mass: Vec<f64>,
}

impl MraDensity {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() || mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(MraError::Invalid("density entries must be finite and non-negative".into()));
        }
        let s: f64 = mass.iter().sum();
        if (s - 1.0).abs() > 1e-10 {
            return Err(MraError::Invalid(format!("density sums to {s}, not 1")));
        }
        Ok(Self { mass })
    }

    pub fn uniform(n: usize) -> Self {
        Self { mass: vec![1.0 / n as f64; n] }
    }

    /// All mass at shift zero.
    pub fn delta(n: usize) -> Self {
        let mut mass = vec![0.0; n];
        mass[center(n)] = 1.0;
        Self { mass }
    }

    pub fn n(&self) -> usize {
        self.mass.len()
    }
}

/// Centered unitary DFT of a real vector.
pub fn dft(x: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    AxisFft::new(x.len(), false, true).process_mut(&mut buf);
    buf
}

pub fn dft_complex(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    AxisFft::new(x.len(), false, true).process_mut(&mut buf);
    buf
}

pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    AxisFft::new(x.len(), true, true).process_mut(&mut buf);
    buf
}

/// Phase factors `exp(-i k n s)` on the frequency grid.
pub fn shift_phases(n: usize, s: f64) -> Vec<Complex64> {
    freq_grid(n).into_iter().map(|k| Complex64::from_polar(1.0, -k * n as f64 * s)).collect()
}

/// Fourier coefficients of the signal shifted by `s` (in units of the
/// period, so `s = 1/n` is one grid step).
pub fn shift_fourier(vhat: &[Complex64], s: f64) -> Vec<Complex64> {
    vhat.iter().zip(shift_phases(vhat.len(), s)).map(|(v, p)| v * p).collect()
}

/// Cyclic rotation by `o` grid steps: `out[i] = x[i - o]`.
pub fn rotate<T: Copy>(x: &[T], o: i64) -> Vec<T> {
    let n = x.len() as i64;
    (0..n).map(|i| x[(i - o).rem_euclid(n) as usize]).collect()
}

/// The DFT basis `e_j(k) = exp(-i k (j - c))`, one row per shift index j.
pub fn shift_basis(n: usize) -> Vec<Vec<Complex64>> {
    let c = center(n) as f64;
    let ks = freq_grid(n);
    (0..n).map(|j| ks.iter().map(|&k| Complex64::from_polar(1.0, -k * (j as f64 - c))).collect()).collect()
}
