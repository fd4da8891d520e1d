//! Unitary discrete Fourier transforms.
//!
//! [`fft`]/[`ifft`] use the standard index convention (frequency 0 at index
//! 0). [`cfft`]/[`icfft`] use the centered convention of [`crate::grid`]:
//! index `i` is offset `i - n/2` in both domains. Every transform is scaled
//! by `1/sqrt(n)` per axis so the DFT matrix is unitary.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::error::{CoreError, Result};
use crate::grid::center;
use crate::tensor::CTensor;

pub fn fft(x: &CTensor, dims: &[usize]) -> Result<CTensor> {
    transform(x, dims, FftDirection::Forward, false)
}

pub fn ifft(x: &CTensor, dims: &[usize]) -> Result<CTensor> {
    transform(x, dims, FftDirection::Inverse, false)
}

pub fn cfft(x: &CTensor, dims: &[usize]) -> Result<CTensor> {
    transform(x, dims, FftDirection::Forward, true)
}

pub fn icfft(x: &CTensor, dims: &[usize]) -> Result<CTensor> {
    transform(x, dims, FftDirection::Inverse, true)
}

fn transform(x: &CTensor, dims: &[usize], dir: FftDirection, centered: bool) -> Result<CTensor> {
    x.check_finite()?;
    for &d in dims {
        if d >= x.rank() {
            return Err(CoreError::Invalid(format!("axis {d} out of range for rank {}", x.rank())));
        }
        if x.shape()[d] == 0 {
            return Err(CoreError::Invalid(format!("axis {d} has zero extent")));
        }
    }
    let mut out = x.clone();
    let shape = x.shape().to_vec();
    let strides = x.strides();
    let mut planner = FftPlanner::new();
    for &d in dims {
        let mut line = AxisFft::with_planner(&mut planner, shape[d], dir, centered);
        let n = shape[d];
        let stride = strides[d];
        let outer: usize = shape[..d].iter().product();
        let inner = stride;
        let mut buf = vec![Complex64::default(); n];
        let data = out.data_mut();
        for o in 0..outer {
            for i in 0..inner {
                let base = o * n * stride + i;
                for (j, b) in buf.iter_mut().enumerate() {
                    *b = data[base + j * stride];
                }
                line.process_mut(&mut buf);
                for (j, b) in buf.iter().enumerate() {
                    data[base + j * stride] = *b;
                }
            }
        }
    }
    Ok(out)
}

/// A planned unitary 1D transform that can be applied repeatedly in place.
#[derive(Clone)]
pub struct AxisFft {
    n: usize,
    plan: Arc<dyn Fft<f64>>,
    centered: bool,
    scale: f64,
    scratch: Vec<Complex64>,
    tmp: Vec<Complex64>,
}

impl AxisFft {
    pub fn new(n: usize, inverse: bool, centered: bool) -> Self {
        let dir = if inverse { FftDirection::Inverse } else { FftDirection::Forward };
        Self::with_planner(&mut FftPlanner::new(), n, dir, centered)
    }

    fn with_planner(planner: &mut FftPlanner<f64>, n: usize, dir: FftDirection, centered: bool) -> Self {
        let plan = planner.plan_fft(n, dir);
        let scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        Self { n, plan, centered, scale: 1.0 / (n as f64).sqrt(), scratch, tmp: vec![Complex64::default(); n] }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn process_mut(&mut self, buf: &mut [Complex64]) {
        let n = self.n;
        debug_assert_eq!(buf.len(), n);
        if self.centered {
            let c = center(n);
            // ifftshift: offset 0 moves to index 0
            for q in 0..n {
                self.tmp[q] = buf[(q + c) % n];
            }
            self.plan.process_with_scratch(&mut self.tmp, &mut self.scratch);
            // fftshift back to centered frequency order
            for j in 0..n {
                buf[j] = self.tmp[(j + n - c) % n] * self.scale;
            }
        } else {
            self.plan.process_with_scratch(buf, &mut self.scratch);
            buf.iter_mut().for_each(|v| *v *= self.scale);
        }
    }
}

/// Centered unitary 2D transform of an `n x n` row-major image, reusable.
#[derive(Clone)]
pub struct CenteredFft2 {
    n: usize,
    line: AxisFft,
    col: Vec<Complex64>,
}

impl CenteredFft2 {
    pub fn new(n: usize, inverse: bool) -> Self {
        Self { n, line: AxisFft::new(n, inverse, true), col: vec![Complex64::default(); n] }
    }

    pub fn process(&mut self, img: &mut [Complex64]) {
        let n = self.n;
        debug_assert_eq!(img.len(), n * n);
        for row in img.chunks_mut(n) {
            self.line.process_mut(row);
        }
        for x in 0..n {
            for y in 0..n {
                self.col[y] = img[y * n + x];
            }
            self.line.process_mut(&mut self.col);
            for y in 0..n {
                img[y * n + x] = self.col[y];
            }
        }
    }
}
