//! Shift-aligned relative errors.

use orbit_core::tensor::{cdist, cnorm};
use orbit_core::Complex64;

use crate::error::{MraError, Result};
use crate::signal::{dft, shift_phases};

/// Shift candidates per grid step used for the fractional search.
pub const UPSAMPLE: usize = 10;

/// Shift `s` (in periods) and error of the best alignment of `vhat` to
/// `uhat`: `min_s |exp(-i k n s) vhat - uhat| / |vhat|` over shifts on a grid
/// `upsample` times finer than the signal grid.
pub fn best_shift(uhat: &[Complex64], vhat: &[Complex64], upsample: usize) -> Result<(f64, f64)> {
    let n = vhat.len();
    if uhat.len() != n {
        return Err(MraError::Shape(format!("lengths {} and {}", uhat.len(), n)));
    }
    let denom = cnorm(vhat);
    if denom == 0.0 {
        return Err(MraError::Invalid("reference has zero norm".into()));
    }
    let steps = n * upsample.max(1);
    let mut best = (0.0, f64::INFINITY);
    for t in 0..steps {
        let s = t as f64 / steps as f64;
        let shifted: Vec<Complex64> = vhat.iter().zip(shift_phases(n, s)).map(|(v, p)| v * p).collect();
        let e = cdist(&shifted, uhat) / denom;
        if e < best.1 {
            best = (s, e);
        }
    }
    Ok(best)
}

/// Relative error between Fourier coefficient vectors, minimized over shifts.
pub fn relative_error_fourier(uhat: &[Complex64], vhat: &[Complex64]) -> Result<f64> {
    Ok(best_shift(uhat, vhat, UPSAMPLE)?.1)
}

/// `min_s |s o v - u| / |v|` for real signals (or densities) on the grid.
pub fn relative_error_signal(u: &[f64], v: &[f64]) -> Result<f64> {
    relative_error_fourier(&dft(u), &dft(v))
}

/// Integer rotation `o` minimizing `|rotate(v, o) - u|`, lowest `o` on ties.
pub fn best_rotation(u: &[f64], v: &[f64]) -> i64 {
    let n = v.len() as i64;
    let mut best = (0, f64::INFINITY);
    for o in 0..n {
        let e: f64 = (0..n).map(|i| (v[(i - o).rem_euclid(n) as usize] - u[i as usize]).powi(2)).sum();
        if e < best.1 {
            best = (o, e);
        }
    }
    best.0
}
