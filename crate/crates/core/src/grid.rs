//! Centered index grids.
//!
//! Grid index `i` of an extent-`n` axis corresponds to the integer offset
//! `i - n/2`. The spatial grid on [-1/2, 1/2) is `offset / n` and the
//! frequency grid on [-pi, pi) is `2 pi offset / n`; for odd `n` both are
//! symmetric about zero.

use std::f64::consts::PI;

pub fn center(n: usize) -> usize {
    n / 2
}

pub fn offset(i: usize, n: usize) -> i64 {
    i as i64 - center(n) as i64
}

pub fn offsets(n: usize) -> Vec<i64> {
    (0..n).map(|i| offset(i, n)).collect()
}

/// The n equispaced points of the interval [-1/2, 1/2).
pub fn space_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| offset(i, n) as f64 / n as f64).collect()
}

/// The n equispaced frequencies in [-pi, pi).
pub fn freq_grid(n: usize) -> Vec<f64> {
    (0..n).map(|i| 2.0 * PI * offset(i, n) as f64 / n as f64).collect()
}

/// Index of the offset `o` (taken modulo n).
pub fn index_of_offset(o: i64, n: usize) -> usize {
    (o + center(n) as i64).rem_euclid(n as i64) as usize
}
