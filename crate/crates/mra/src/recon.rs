//! Moment fitting from a (possibly pre-trained) encoder: map latents to
//! moments, align the density against the signal, and refine the network
//! weights by gradient descent on the moment mismatch.

use std::sync::Arc;

use orbit_core::tensor::{cdist, cnorm};
use orbit_core::{Complex64, RTensor};
use orbit_nn::{Adam, Sparse, Tape, Var};
use serde::{Deserialize, Serialize};

use crate::encoder::{encoder_inputs, Encoder, Head};
use crate::error::{MraError, Result};
use crate::metrics::{relative_error_fourier, relative_error_signal};
use crate::moments::{weighted_moments, MomentPair};
use crate::signal::{rotate, shift_basis};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconConfig {
    /// Weight of the second-moment term.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_iterations")]
    pub iterations: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_project")]
    pub project_density: bool,
}

fn default_lambda() -> f64 {
    1.0
}
fn default_iterations() -> usize {
    3000
}
fn default_lr() -> f64 {
    1e-4
}
fn default_project() -> bool {
    true
}

impl Default for ReconConfig {
    fn default() -> Self {
        Self { lambda: 1.0, iterations: 3000, lr: 1e-4, project_density: true }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(MraError::Invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(MraError::Invalid(format!("learning rate must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

/// Clip negatives and renormalize; all-nonpositive input maps to uniform.
pub fn project_simplex(z: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = z.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = clipped.iter().sum();
    if s > 0.0 {
        clipped.iter().map(|v| v / s).collect()
    } else {
        vec![1.0 / z.len() as f64; z.len()]
    }
}

/// Moments of the latents `(z_v, z_rho)` by the finite shift sums.
pub fn latents_to_moments(z_v: &[Complex64], z_rho: &[f64]) -> Result<MomentPair> {
    if z_v.len() != z_rho.len() {
        return Err(MraError::Shape(format!("z_v has {} entries, z_rho {}", z_v.len(), z_rho.len())));
    }
    Ok(weighted_moments(z_v, z_rho))
}

/// `|m1 - M1| + lambda |m2 - M2|` (Frobenius norms).
pub fn moment_loss(model: &MomentPair, m1: &[Complex64], m2: &[Complex64], lambda: f64) -> f64 {
    cdist(m1, &model.m1) + lambda * cdist(m2, &model.m2)
}

/// Rotate the density latent against the signal latent by the grid shift
/// that minimizes the moment loss; returns the rotated density and the
/// rotation. A joint shift of both latents leaves the moments unchanged, so
/// only their relative shift can matter. The identity wins ties.
pub fn align_latents(z_v: &[Complex64], z_rho: &[f64], m1: &[Complex64], m2: &[Complex64], lambda: f64) -> Result<(Vec<f64>, i64)> {
    let n = z_rho.len();
    let mut best = (0i64, f64::INFINITY);
    for o in 0..n as i64 {
        let loss = moment_loss(&latents_to_moments(z_v, &rotate(z_rho, o))?, m1, m2, lambda);
        if loss < best.1 {
            best = (o, loss);
        }
    }
    Ok((rotate(z_rho, best.0), best.0))
}

/// Constant pieces of the on-tape moment map for an `n`-point grid.
#[derive(Debug, Clone)]
pub struct MomentMap {
    n: usize,
    tile: Arc<Sparse>,
    basis: RTensor,
}

impl MomentMap {
    pub fn new(n: usize) -> Self {
        // tile z_v [n, 2] to [n (shift), n (freq), 2]
        let src: Vec<usize> = (0..n).flat_map(|_| 0..2 * n).collect();
        let basis = shift_basis(n).into_iter().flatten().flat_map(|c| [c.re, c.im]).collect();
        Self { n, tile: Arc::new(Sparse::gather(&src, 2 * n)), basis: RTensor::new(vec![n, n, 2], basis).expect("n*n*2") }
    }

    /// `(m1 [n, 2], m2 [n, n, 2])` for `z_v` with `2n` values and `z_rho` with `n`.
    pub fn apply(&self, tape: &mut Tape, z_v: Var, z_rho: Var) -> Result<(Var, Var)> {
        let n = self.n;
        let zr = tape.reshape(z_rho, &[n])?;
        let tiled = tape.sparse(z_v, self.tile.clone(), &[n, n, 2])?;
        let e = tape.constant(self.basis.clone());
        let s = tape.complex_mul(tiled, e)?;
        Ok((tape.weighted_sum(zr, s)?, tape.weighted_outer(zr, s)?))
    }
}

/// Ground truth for error traces.
#[derive(Debug, Clone, Copy)]
pub struct Truth<'a> {
    pub vhat: &'a [Complex64],
    pub rho: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub loss: f64,
    pub m1_error: f64,
    pub m2_error: f64,
    /// NaN without ground truth.
    pub signal_error: f64,
    pub density_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub z_v: Vec<Complex64>,
    pub z_rho: Vec<f64>,
    /// Rotation applied to the density head output by the alignment step.
    pub rotation: i64,
    /// One row per iteration plus the final state.
    pub trace: Vec<TraceRow>,
}

impl Refinement {
    /// Mean of the final signal and density errors.
    pub fn final_error(&self) -> f64 {
        let last = self.trace.last().expect("trace has the initial row");
        0.5 * (last.signal_error + last.density_error)
    }
}

struct Step {
    z_v: Vec<Complex64>,
    z_rho: Vec<f64>,
    loss: f64,
    model: MomentPair,
    grads: Option<Vec<Vec<f64>>>,
}

/// Optimize both encoders' weights so that their latents reproduce the
/// measured moments `(m1, m2)`. The encoders are updated in place.
pub fn refine(enc_v: &mut Encoder, enc_rho: &mut Encoder, m1: &[Complex64], m2: &[Complex64], cfg: &ReconConfig, truth: Option<Truth>) -> Result<Refinement> {
    cfg.validate()?;
    let n = m1.len();
    if enc_v.head != Head::V || enc_rho.head != Head::Rho {
        return Err(MraError::Invalid("refine needs a signal encoder and a density encoder".into()));
    }
    if enc_v.n != n || enc_rho.n != n || m2.len() != n * n {
        return Err(MraError::Shape(format!("moments for n = {n} do not match the encoders")));
    }
    let measured = MomentPair { m1: m1.to_vec(), m2: m2.to_vec(), kind: crate::moments::MomentKind::Empirical, sigma: None, count: None };
    measured.check()?;
    let (x1, x2) = encoder_inputs(&[&measured])?;
    let map = MomentMap::new(n);
    let t1 = RTensor::new(vec![n, 2], m1.iter().flat_map(|c| [c.re, c.im]).collect())?;
    let t2 = RTensor::new(vec![n, n, 2], m2.iter().flat_map(|c| [c.re, c.im]).collect())?;
    let split = enc_v.params.len();
    let mut lens = enc_v.params.lens();
    lens.extend(enc_rho.params.lens());

    let run = |enc_v: &Encoder, enc_rho: &Encoder, rotation: i64, want_grads: bool| -> Result<Step> {
        let mut tape = Tape::new();
        let vv = enc_v.params.vars_from(&mut tape, 0);
        let vr = enc_rho.params.vars_from(&mut tape, split);
        let a = tape.constant(x1.clone());
        let b = tape.constant(x2.clone());
        let zv = enc_v.forward(&mut tape, &vv, a, b)?;
        let zv = tape.reshape(zv, &[n, 2])?;
        let zr = enc_rho.forward(&mut tape, &vr, a, b)?;
        let src: Vec<usize> = rotate(&(0..n).collect::<Vec<_>>(), rotation);
        let mut zr = tape.sparse(zr, Arc::new(Sparse::gather(&src, n)), &[n])?;
        if cfg.project_density {
            zr = tape.simplex_project(zr);
        }
        let (p1, p2) = map.apply(&mut tape, zv, zr)?;
        let c1 = tape.constant(t1.clone());
        let c2 = tape.constant(t2.clone());
        let l1 = tape.frob_dist(p1, c1)?;
        let l2 = tape.frob_dist(p2, c2)?;
        let l2 = tape.scale(l2, cfg.lambda);
        let loss = tape.add(l1, l2)?;
        let to_c = |v: &[f64]| v.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect::<Vec<_>>();
        let model = MomentPair { m1: to_c(tape.value(p1)), m2: to_c(tape.value(p2)), kind: crate::moments::MomentKind::Analytic, sigma: None, count: None };
        let value = tape.scalar(loss);
        let grads = if want_grads && value.is_finite() { Some(tape.backward(loss)?.params(&lens)) } else { None };
        Ok(Step { z_v: to_c(tape.value(zv)), z_rho: tape.value(zr).to_vec(), loss: value, model, grads })
    };

    // alignment on the initial latents
    let start = run(enc_v, enc_rho, 0, false)?;
    let raw_rho = {
        let mut tape = Tape::new();
        let vr = enc_rho.params.vars(&mut tape);
        let a = tape.constant(x1.clone());
        let b = tape.constant(x2.clone());
        let zr = enc_rho.forward(&mut tape, &vr, a, b)?;
        tape.value(zr).to_vec()
    };
    let candidate = if cfg.project_density { project_simplex(&raw_rho) } else { raw_rho };
    let (_, rotation) = align_latents(&start.z_v, &candidate, m1, m2, cfg.lambda)?;

    let (d1, d2) = (cnorm(m1).max(f64::MIN_POSITIVE), cnorm(m2).max(f64::MIN_POSITIVE));
    let row = |it: usize, s: &Step| -> Result<TraceRow> {
        let (signal_error, density_error) = match truth {
            Some(t) => (relative_error_fourier(&s.z_v, t.vhat)?, relative_error_signal(&s.z_rho, t.rho)?),
            None => (f64::NAN, f64::NAN),
        };
        Ok(TraceRow {
            iteration: it,
            loss: s.loss,
            m1_error: cdist(&s.model.m1, m1) / d1,
            m2_error: cdist(&s.model.m2, m2) / d2,
            signal_error,
            density_error,
        })
    };

    let mut adam_v = Adam::new(&enc_v.params);
    let mut adam_r = Adam::new(&enc_rho.params);
    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    let check = |it: usize, s: &Step| {
        if s.loss.is_finite() {
            Ok(())
        } else {
            Err(MraError::Numerical(format!("refinement loss became {} at iteration {it}", s.loss)))
        }
    };
    for it in 0..cfg.iterations {
        let step = run(enc_v, enc_rho, rotation, true)?;
        check(it, &step)?;
        trace.push(row(it, &step)?);
        let mut grads = step.grads.expect("gradients requested");
        let g_rho = grads.split_off(split);
        adam_v.step(&mut enc_v.params, &grads, cfg.lr)?;
        adam_r.step(&mut enc_rho.params, &g_rho, cfg.lr)?;
    }
    let step = run(enc_v, enc_rho, rotation, false)?;
    check(cfg.iterations, &step)?;
    trace.push(row(cfg.iterations, &step)?);
    Ok(Refinement { z_v: step.z_v, z_rho: step.z_rho, rotation, trace })
}
