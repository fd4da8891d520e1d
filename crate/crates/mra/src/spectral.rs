//! Spectral inversion of the second moment for unit-modulus signals.
//!
//! When `|vhat(k)| = 1`, `m2 = D C D^*` with `D = diag(vhat)` unitary and `C`
//! circulant, so the eigenvalues of `m2` are `n rho_j` and its eigenvectors
//! are `vhat * e_j / sqrt(n)`. Dividing every eigenvector entrywise by a
//! reference eigenvector leaves a pure DFT column, which identifies the
//! shift each eigenvalue belongs to.

use nalgebra::{DMatrix, SymmetricEigen};
use orbit_core::grid::center;
use orbit_core::tensor::cnorm;
use orbit_core::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MraError, Result};
use crate::signal::shift_basis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// Dense Hermitian eigendecomposition.
    #[default]
    Dense,
    /// Repeated multiplication by `m2` with deflation.
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralOptions {
    pub assume_unit_modulus: bool,
    #[serde(default)]
    pub method: EigenMethod,
    /// Eigenvalue gaps below this fraction of the largest eigenvalue are
    /// reported as degenerate.
    #[serde(default = "default_gap")]
    pub gap_tol: f64,
}

fn default_gap() -> f64 {
    1e-8
}

impl Default for SpectralOptions {
    fn default() -> Self {
        Self { assume_unit_modulus: true, method: EigenMethod::Dense, gap_tol: default_gap() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralResult {
    pub vhat: Vec<Complex64>,
    pub rho: Vec<f64>,
    /// Eigenvalues in decreasing order.
    pub eigenvalues: Vec<f64>,
    /// Smallest gap between consecutive eigenvalues, relative to the largest.
    pub min_gap: f64,
    /// True if eigenvalue gaps or column matches are ambiguous.
    pub degenerate: bool,
}

/// Eigenpairs of a Hermitian matrix, eigenvalues decreasing.
fn dense_eigen(m2: &[Complex64], n: usize) -> Result<Vec<(f64, Vec<Complex64>)>> {
    let a = DMatrix::from_row_slice(n, n, m2);
    let eig = SymmetricEigen::try_new(a, 1e-15, 10_000)
        .ok_or_else(|| MraError::Numerical("eigen-solver did not converge".into()))?;
    let mut pairs: Vec<(f64, Vec<Complex64>)> =
        (0..n).map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().cloned().collect())).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(pairs)
}

fn matvec(a: &[Complex64], x: &[Complex64], n: usize) -> Vec<Complex64> {
    (0..n).map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum()).collect()
}

/// Power iteration with Hotelling deflation.
fn power_eigen(m2: &[Complex64], n: usize) -> Result<Vec<(f64, Vec<Complex64>)>> {
    let mut a = m2.to_vec();
    let scale = cnorm(m2).max(f64::MIN_POSITIVE);
    let mut pairs = Vec::with_capacity(n);
    for t in 0..n {
        // a fixed, generic starting vector
        let mut x: Vec<Complex64> = (0..n).map(|i| Complex64::new(1.0 + 0.1 * i as f64, 0.05 * (i + t) as f64)).collect();
        let mut lambda = 0.0;
        for _ in 0..100_000 {
            let y = matvec(&a, &x, n);
            let norm = cnorm(&y);
            if norm <= 1e-300 {
                lambda = 0.0;
                break;
            }
            let next: Vec<Complex64> = y.iter().map(|v| v / norm).collect();
            // compare up to phase
            let overlap: Complex64 = next.iter().zip(&x).map(|(p, q)| p.conj() * q).sum();
            let xn = cnorm(&x);
            let converged = (1.0 - overlap.norm() / xn).abs() < 1e-15;
            x = next;
            let ax = matvec(&a, &x, n);
            lambda = x.iter().zip(&ax).map(|(p, q)| (p.conj() * q).re).sum();
            if converged {
                break;
            }
        }
        if !lambda.is_finite() {
            return Err(MraError::Numerical("power iteration diverged".into()));
        }
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] -= lambda * x[i] * x[j].conj();
            }
        }
        if lambda.abs() < 1e-14 * scale {
            lambda = 0.0;
        }
        pairs.push((lambda, x));
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(pairs)
}

/// Recover `(vhat, rho)` from `m2`, up to a common shift.
///
/// `m1`, when given, fixes the remaining global phase; otherwise `vhat` at
/// zero frequency is made real and non-negative.
pub fn spectral_invert(m2: &[Complex64], m1: Option<&[Complex64]>, opts: &SpectralOptions) -> Result<SpectralResult> {
    if !opts.assume_unit_modulus {
        return Err(MraError::Invalid("spectral inversion needs the unit-modulus assumption".into()));
    }
    let n = (m2.len() as f64).sqrt().round() as usize;
    if n * n != m2.len() || n == 0 {
        return Err(MraError::Shape(format!("m2 has {} entries, not a square", m2.len())));
    }
    if m2.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(MraError::Invalid("m2 has non-finite entries".into()));
    }
    let scale = cnorm(m2);
    for a in 0..n {
        for b in 0..n {
            if (m2[a * n + b] - m2[b * n + a].conj()).norm() > 1e-8 * scale.max(1.0) {
                return Err(MraError::Invalid("m2 is not Hermitian".into()));
            }
        }
    }
    let pairs = match opts.method {
        EigenMethod::Dense => dense_eigen(m2, n)?,
        EigenMethod::Power => power_eigen(m2, n)?,
    };
    let eigenvalues: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let top = eigenvalues[0].abs().max(f64::MIN_POSITIVE);
    let min_gap = eigenvalues.windows(2).map(|w| (w[0] - w[1]) / top).fold(f64::INFINITY, f64::min);
    let mut degenerate = min_gap < opts.gap_tol;

    let sqrt_n = (n as f64).sqrt();
    let reference: Vec<Complex64> = pairs[0].1.iter().map(|v| v * sqrt_n).collect();
    if reference.iter().any(|r| r.norm() < 1e-6) {
        return Err(MraError::Numerical("leading eigenvector has (near) zero entries; not unit modulus".into()));
    }
    let basis = shift_basis(n);
    let mut rho = vec![0.0; n];
    let mut taken = vec![false; n];
    for (lambda, u) in &pairs {
        let q: Vec<Complex64> = u.iter().zip(&reference).map(|(x, r)| x * sqrt_n / r).collect();
        let scores: Vec<f64> =
            basis.iter().map(|e| e.iter().zip(&q).map(|(b, x)| b.conj() * x).sum::<Complex64>().norm()).collect();
        let best = (0..n).filter(|&m| !taken[m]).fold(None, |acc: Option<usize>, m| match acc {
            Some(b) if scores[b] >= scores[m] => Some(b),
            _ => Some(m),
        });
        let m = best.expect("a free column remains");
        let overall = (0..n).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
        if overall != m && lambda.abs() > opts.gap_tol * top {
            degenerate = true;
        }
        taken[m] = true;
        rho[m] = lambda / n as f64;
    }

    let phase = match m1 {
        Some(m1) if m1.len() == n => {
            let c = center(n);
            let est: Vec<Complex64> = (0..n)
                .map(|k| {
                    let mix: Complex64 = (0..n).map(|j| rho[j] * basis[j][k]).sum();
                    mix * reference[k]
                })
                .collect();
            let dot: Complex64 = est.iter().zip(m1).map(|(e, m)| e.conj() * m).sum();
            if dot.norm() > 0.0 {
                dot / dot.norm()
            } else {
                (reference[c].conj()) / reference[c].norm()
            }
        }
        Some(m1) => return Err(MraError::Shape(format!("m1 has {} entries, expected {}", m1.len(), n))),
        None => {
            let r0 = reference[center(n)];
            r0.conj() / r0.norm()
        }
    };
    let vhat = reference.iter().map(|r| r * phase).collect();
    Ok(SpectralResult { vhat, rho, eigenvalues, min_gap, degenerate })
}
