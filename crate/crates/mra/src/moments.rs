//! First and second Fourier moments: analytic, simulated and empirical.

use orbit_core::fft::AxisFft;
use orbit_core::grid::center;
use orbit_core::reduce::chunked_sum;
use orbit_core::rng::fill_standard_normal;
use orbit_core::tensor::{cdist, cnorm};
use orbit_core::{Complex64, RTensor, SeededRng, Workers};
use orbit_nn::linalg::complex_gram;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MraError, Result};
use crate::signal::{rotate, shift_basis, MraDensity, MraSignal};

/// Observations per deterministic work chunk.
pub const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    Analytic,
    Empirical,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentPair {
    pub m1: Vec<Complex64>,
    /// Row-major `n x n`.
    pub m2: Vec<Complex64>,
    pub kind: MomentKind,
    pub sigma: Option<f64>,
    pub count: Option<u64>,
}

impl MomentPair {
    pub fn n(&self) -> usize {
        self.m1.len()
    }

    /// Largest `|m2[a][b] - conj(m2[b][a])|`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n();
        let mut worst: f64 = 0.0;
        for a in 0..n {
            for b in 0..n {
                worst = worst.max((self.m2[a * n + b] - self.m2[b * n + a].conj()).norm());
            }
        }
        worst
    }

    pub fn check(&self) -> Result<()> {
        let n = self.n();
        if self.m2.len() != n * n {
            return Err(MraError::Shape(format!("m1 has {} entries but m2 has {}", n, self.m2.len())));
        }
        if self.m1.iter().chain(&self.m2).any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(MraError::Invalid("moments contain non-finite values".into()));
        }
        Ok(())
    }
}

/// Finite-sum moments of `v` under shifts distributed as `rho`.
///
/// With `e_j(k) = exp(-i k (j - c))`,
/// `m1 = sum_j rho_j e_j * vhat` and
/// `m2 = sum_j rho_j (e_j * vhat)(e_j * vhat)^*`; the shift sum collapses to
/// the DFT of `rho` evaluated at frequency differences.
pub fn analytic_moments(v: &MraSignal, rho: &MraDensity) -> Result<MomentPair> {
    if rho.n() != v.n {
        return Err(MraError::Shape(format!("signal has {} points, density {}", v.n, rho.n())));
    }
    Ok(weighted_moments(&v.fourier, &rho.mass))
}

/// The same finite sums for arbitrary coefficients and (possibly
/// unnormalized) weights.
pub fn weighted_moments(vhat: &[Complex64], weights: &[f64]) -> MomentPair {
    let n = vhat.len();
    let c = center(n);
    let basis = shift_basis(n);
    // rt[d] = sum_j w_j exp(-i 2 pi d (j - c) / n) for frequency offset d mod n,
    // i.e. e_j at frequency index c + d
    let rt: Vec<Complex64> = (0..n).map(|d| (0..n).map(|j| weights[j] * basis[j][(c + d) % n]).sum()).collect();
    let m1 = (0..n).map(|a| vhat[a] * rt[(a + n - c) % n]).collect();
    let mut m2 = vec![Complex64::default(); n * n];
    for a in 0..n {
        for b in 0..n {
            m2[a * n + b] = vhat[a] * vhat[b].conj() * rt[(a + n - b) % n];
        }
    }
    MomentPair { m1, m2, kind: MomentKind::Analytic, sigma: None, count: None }
}

/// A batch of shifted noisy observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Observations {
    /// `[count, n]`.
    pub rows: RTensor,
    /// Shift index (into the density grid) used for each row.
    pub shifts: Vec<usize>,
}

fn check_sim(v: &MraSignal, rho: &MraDensity, sigma: f64) -> Result<Vec<f64>> {
    if rho.n() != v.n {
        return Err(MraError::Shape(format!("signal has {} points, density {}", v.n, rho.n())));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(MraError::Invalid(format!("noise level must be >= 0, got {sigma}")));
    }
    let mut cdf = Vec::with_capacity(rho.n());
    let mut acc = 0.0;
    for m in &rho.mass {
        acc += m;
        cdf.push(acc);
    }
    Ok(cdf)
}

fn draw_shift(cdf: &[f64], u: f64) -> usize {
    let total = *cdf.last().expect("non-empty");
    let t = u * total;
    cdf.iter().position(|&c| t < c).unwrap_or(cdf.len() - 1)
}

/// Generate the observations of chunk `chunk` into `out` (`rows x n`).
fn chunk_observations(v: &MraSignal, cdf: &[f64], sigma: f64, rng: &SeededRng, chunk: usize, rows: usize, out: &mut [f64], shifts: &mut [usize]) {
    let n = v.n;
    let c = center(n) as i64;
    let mut stream = rng.stream(chunk as u64);
    let mut noise = vec![0.0; n];
    for r in 0..rows {
        let j = draw_shift(cdf, stream.random::<f64>());
        shifts[r] = j;
        fill_standard_normal(&mut stream, &mut noise);
        let shifted = rotate(&v.values, j as i64 - c);
        for i in 0..n {
            out[r * n + i] = shifted[i] + sigma * noise[i];
        }
    }
}

/// Draw `count` observations: each is `v` cyclically shifted by a
/// `rho`-distributed grid shift plus i.i.d. N(0, sigma^2) noise.
pub fn simulate_observations(v: &MraSignal, rho: &MraDensity, count: usize, sigma: f64, rng: &SeededRng, workers: &Workers) -> Result<Observations> {
    let cdf = check_sim(v, rho, sigma)?;
    if count == 0 {
        return Err(MraError::Invalid("need at least one observation".into()));
    }
    let n = v.n;
    let chunks = count.div_ceil(CHUNK);
    let parts = workers.map(chunks, |ci| {
        let rows = CHUNK.min(count - ci * CHUNK);
        let mut out = vec![0.0; rows * n];
        let mut shifts = vec![0; rows];
        chunk_observations(v, &cdf, sigma, rng, ci, rows, &mut out, &mut shifts);
        (out, shifts)
    });
    let mut data = Vec::with_capacity(count * n);
    let mut shifts = Vec::with_capacity(count);
    for (d, s) in parts {
        data.extend(d);
        shifts.extend(s);
    }
    Ok(Observations { rows: RTensor::new(vec![count, n], data)?, shifts })
}

/// Partial sums `(sum F v_j, sum (F v_j)(F v_j)^*)` over real rows.
fn chunk_sums(rows: &[f64], n: usize, fft: &mut AxisFft) -> (Vec<f64>, Vec<f64>) {
    let count = rows.len() / n;
    let mut freq = vec![0.0; 2 * count * n];
    let mut buf = vec![Complex64::default(); n];
    let mut s1 = vec![0.0; 2 * n];
    for r in 0..count {
        for i in 0..n {
            buf[i] = Complex64::new(rows[r * n + i], 0.0);
        }
        fft.process_mut(&mut buf);
        for i in 0..n {
            freq[2 * (r * n + i)] = buf[i].re;
            freq[2 * (r * n + i) + 1] = buf[i].im;
            s1[2 * i] += buf[i].re;
            s1[2 * i + 1] += buf[i].im;
        }
    }
    let mut s2 = vec![0.0; 2 * n * n];
    complex_gram(&freq, count, n, None, &mut s2);
    (s1, s2)
}

fn finish(sums: (Vec<f64>, Vec<f64>), n: usize, count: usize, sigma: f64) -> MomentPair {
    let inv = 1.0 / count as f64;
    let m1 = sums.0.chunks(2).map(|p| Complex64::new(p[0] * inv, p[1] * inv)).collect();
    let raw: Vec<Complex64> = sums.1.chunks(2).map(|p| Complex64::new(p[0] * inv, p[1] * inv)).collect();
    let mut m2 = vec![Complex64::default(); n * n];
    for a in 0..n {
        for b in 0..n {
            // exact Hermitian symmetry regardless of gemm summation order
            m2[a * n + b] = 0.5 * (raw[a * n + b] + raw[b * n + a].conj());
        }
        m2[a * n + a] -= sigma * sigma;
    }
    MomentPair { m1, m2, kind: MomentKind::Empirical, sigma: Some(sigma), count: Some(count as u64) }
}

/// Unbiased estimators `m1 = mean F v_j`, `m2 = mean (F v_j)(F v_j)^* - sigma^2 I`.
pub fn empirical_moments(batch: &RTensor, sigma: f64, workers: &Workers) -> Result<MomentPair> {
    if batch.rank() != 2 || batch.shape()[0] == 0 {
        return Err(MraError::Invalid(format!("need a non-empty [count, n] batch, got {:?}", batch.shape())));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(MraError::Invalid(format!("noise level must be >= 0, got {sigma}")));
    }
    batch.check_finite()?;
    let (count, n) = (batch.shape()[0], batch.shape()[1]);
    let data = batch.data();
    let sums = chunked_sum(count.div_ceil(CHUNK), workers, |ci| {
        let end = ((ci + 1) * CHUNK).min(count);
        chunk_sums(&data[ci * CHUNK * n..end * n], n, &mut AxisFft::new(n, false, true))
    })
    .expect("at least one chunk");
    Ok(finish(sums, n, count, sigma))
}

/// Simulate and accumulate in one pass without storing observations. Gives
/// bit-identical results to `simulate_observations` followed by
/// `empirical_moments` with the same seed.
pub fn simulate_moments(v: &MraSignal, rho: &MraDensity, count: usize, sigma: f64, rng: &SeededRng, workers: &Workers) -> Result<MomentPair> {
    let cdf = check_sim(v, rho, sigma)?;
    if count == 0 {
        return Err(MraError::Invalid("need at least one observation".into()));
    }
    let n = v.n;
    let sums = chunked_sum(count.div_ceil(CHUNK), workers, |ci| {
        let rows = CHUNK.min(count - ci * CHUNK);
        let mut out = vec![0.0; rows * n];
        let mut shifts = vec![0; rows];
        chunk_observations(v, &cdf, sigma, rng, ci, rows, &mut out, &mut shifts);
        chunk_sums(&out, n, &mut AxisFft::new(n, false, true))
    })
    .expect("at least one chunk");
    Ok(finish(sums, n, count, sigma))
}

/// `(|ref.m1 - pair.m1| / |pair.m1|, |ref.m2 - pair.m2| / |pair.m2|)`.
pub fn relative_error_moments(pair: &MomentPair, reference: &MomentPair) -> Result<(f64, f64)> {
    if pair.n() != reference.n() || pair.m2.len() != reference.m2.len() {
        return Err(MraError::Shape("moment pairs have different sizes".into()));
    }
    let (d1, d2) = (cnorm(&pair.m1), cnorm(&pair.m2));
    if d1 == 0.0 || d2 == 0.0 {
        return Err(MraError::Invalid("zero-norm moment in denominator".into()));
    }
    Ok((cdist(&reference.m1, &pair.m1) / d1, cdist(&reference.m2, &pair.m2) / d2))
}
