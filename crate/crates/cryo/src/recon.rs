//! The cryo encoder and joint moment-matching reconstruction of a neural
//! volume and a rotation density on a quadrature set.

use orbit_core::{Complex64, RTensor, SeededRng};
use orbit_nn::{Adam, Chain, LayerSpec, Params, Stage, Tape, Var};
use serde::{Deserialize, Serialize};

use crate::error::{CryoError, Result};
use crate::neural::{fit_neural_gt, FitConfig, NeuralArch, NeuralVolume, PointLayout};
use crate::quadrature::QuadratureDensity;
use crate::rotation::{quadrature, QuadratureSet};
use crate::slice::{slice_points, CryoMomentPair};

/// Convolutional encoder from `(m1, m2)` to logits on the quadrature set
/// (and optionally a `z_v` latent). `m1` enters as an `n x n` field, `m2`
/// as an `n^2 x n^2` image reduced to `n x n` by a stride-`n` convolution.
#[derive(Debug, Clone)]
pub struct CryoEncoder {
    pub n: usize,
    pub q: usize,
    pub latent: usize,
    pub init_seed: u64,
    pub params: Params,
    m1: Chain,
    m2: Chain,
    merged: Chain,
    head: Chain,
    latent_head: Option<Chain>,
}

/// Network inputs for one moment pair: `[1, n, n, 2]` and `[1, n^2, n^2, 2]`,
/// each scaled to unit root-mean-square entry.
pub fn cryo_encoder_inputs(m: &CryoMomentPair) -> Result<(RTensor, RTensor)> {
    m.check()?;
    let n = m.n;
    let scaled = |v: &[Complex64]| -> Vec<f64> {
        let rms = (v.iter().map(|c| c.norm_sqr()).sum::<f64>() / v.len() as f64).sqrt();
        let s = if rms > 0.0 { 1.0 / rms } else { 1.0 };
        v.iter().flat_map(|c| [c.re * s, c.im * s]).collect()
    };
    Ok((RTensor::new(vec![1, n, n, 2], scaled(&m.m1))?, RTensor::new(vec![1, n * n, n * n, 2], scaled(&m.m2))?))
}

impl CryoEncoder {
    pub fn size(&self) -> usize {
        self.params.count()
    }

    pub fn header(&self) -> serde_json::Value {
        serde_json::json!({ "model": "cryo_encoder", "n": self.n, "q": self.q, "latent": self.latent })
    }

    /// `(z_rho [q], z_v [latent])` with `z_rho` on the simplex.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x1: Var, x2: Var) -> Result<(Var, Option<Var>)> {
        let a = self.m1.forward(tape, vars, x1)?;
        let b = self.m2.forward(tape, vars, x2)?;
        let stacked = tape.concat(&[a, b])?;
        let f = self.merged.forward(tape, vars, stacked)?;
        let logits = self.head.forward(tape, vars, f)?;
        let z = tape.softmax(logits);
        let z = tape.reshape(z, &[self.q])?;
        let latent = match &self.latent_head {
            Some(h) => {
                let l = h.forward(tape, vars, f)?;
                Some(tape.reshape(l, &[self.latent])?)
            }
            None => None,
        };
        Ok((z, latent))
    }
}

/// Build the cryo encoder for odd `n >= 5` (the stride-`n` reduction of
/// `m2` needs an odd window).
pub fn build_cryo_encoder(n: usize, q: usize, latent: usize, seed: u64) -> Result<CryoEncoder> {
    if n < 5 || n % 2 == 0 || q == 0 {
        return Err(CryoError::Invalid(format!("cryo encoder needs odd n >= 5 and a nonempty quadrature, got n = {n}, |Q| = {q}")));
    }
    use LayerSpec::Lrelu;
    let c = LayerSpec::conv2d;
    let mut params = Params::default();
    let mut rng = SeededRng::new(seed, "encoder/cryo").stream(0);
    let m1 = Chain::build("m1", &[n, n, 2], &[c(5, 8), Lrelu, c(5, 8), Lrelu, c(5, 3), Lrelu], &mut params, &mut rng)?;
    let reduce = LayerSpec::Conv2d { window: n, channels: 32, stride: n };
    let m2 = Chain::build("m2", &[n * n, n * n, 2], &[reduce, Lrelu, c(5, 16), Lrelu, c(5, 3), Lrelu], &mut params, &mut rng)?;
    if m1.output != m2.output {
        return Err(CryoError::Invalid(format!("encoder branches disagree: {:?} vs {:?}", m1.output, m2.output)));
    }
    let merged = Chain::build("merged", &[n, n, 6], &[c(5, 8), Lrelu, c(5, 8), Lrelu], &mut params, &mut rng)?;
    let head = Chain::build("head", &merged.output, &[LayerSpec::full(64), Lrelu, LayerSpec::full(q)], &mut params, &mut rng)?;
    let latent_head = if latent > 0 {
        Some(Chain::build("latent", &merged.output, &[LayerSpec::full(64), Lrelu, LayerSpec::full(latent)], &mut params, &mut rng)?)
    } else {
        None
    };
    Ok(CryoEncoder { n, q, latent, init_seed: seed, params, m1, m2, merged, head, latent_head })
}

/// Every slice point of every rotation of `q`, rotation-major.
pub fn quadrature_layout(q: &QuadratureSet, n: usize, octaves: usize) -> PointLayout {
    let targets: Vec<_> = q.rotations.iter().flat_map(|r| slice_points(r, n)).collect();
    PointLayout::new(&targets, n, octaves)
}

/// Quadrature moments `(m1 [D, 2], m2 [D, D, 2])` of a neural volume on a
/// tape, with `z [J]` the density on the quadrature set.
pub fn moments_on_tape(
    tape: &mut Tape,
    vol: &NeuralVolume,
    vol_vars: &[Var],
    layout: &PointLayout,
    z: Var,
    latent: Option<Var>,
) -> Result<(Var, Var)> {
    let j = tape.shape(z)[0];
    let d = layout.targets / j.max(1);
    let s = vol.on_tape(tape, vol_vars, layout, latent)?;
    let s = tape.reshape(s, &[j, d, 2])?;
    Ok((tape.weighted_sum(z, s)?, tape.weighted_outer(z, s)?))
}

fn moment_tensors(m: &CryoMomentPair) -> (RTensor, RTensor) {
    let d = m.n * m.n;
    let flat = |v: &[Complex64]| v.iter().flat_map(|c| [c.re, c.im]).collect::<Vec<_>>();
    (RTensor::new(vec![d, 2], flat(&m.m1)).expect("m1 shape"), RTensor::new(vec![d, d, 2], flat(&m.m2)).expect("m2 shape"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct CryoReconConfig {
    pub lambda: f64,
    pub schedule: Vec<Stage>,
    /// Quadrature directions (36 and 100 have exact designs) and in-plane
    /// angles.
    pub q1: usize,
    pub q2: usize,
    /// Width of the `z_v` latent; 0 disables it.
    pub latent: usize,
    /// Divide each loss term by the norm of the target moment.
    pub normalize: bool,
    pub seed: u64,
    pub volume: NeuralArch,
    /// Epochs of a least-squares pre-fit of a fresh volume to the radial
    /// profile of `m1` before the joint fit; 0 only sets the amplitude
    /// bias from the zero frequency.
    pub init_epochs: usize,
}

impl Default for CryoReconConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            schedule: vec![Stage { lr: 1e-3, epochs: 1500 }, Stage { lr: 1e-4, epochs: 500 }],
            q1: 36,
            q2: 8,
            latent: 0,
            normalize: false,
            seed: 0,
            volume: NeuralArch::default(),
            init_epochs: 300,
        }
    }
}

impl CryoReconConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(CryoError::Invalid(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.schedule.iter().any(|s| !(s.lr > 0.0 && s.lr.is_finite())) {
            return Err(CryoError::Invalid("learning rates must be positive".into()));
        }
        if self.q1 == 0 || self.q2 == 0 {
            return Err(CryoError::Invalid("quadrature needs q1, q2 >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CryoTraceRow {
    pub epoch: usize,
    pub lr: f64,
    pub loss: f64,
    pub m1_error: f64,
    pub m2_error: f64,
}

#[derive(Debug, Clone)]
pub struct CryoReconstruction {
    pub volume: NeuralVolume,
    pub encoder: CryoEncoder,
    pub z_rho: QuadratureDensity,
    pub quadrature: QuadratureSet,
    /// One row per epoch, evaluated before that epoch's update, plus a
    /// final row after the last update.
    pub trace: Vec<CryoTraceRow>,
    /// First epoch at which the loss had dropped by less than a relative
    /// 1e-6 over the preceding 1000 epochs.
    pub stagnated_at: Option<usize>,
}

impl CryoReconstruction {
    pub fn final_row(&self) -> &CryoTraceRow {
        self.trace.last().expect("trace has a final row")
    }
}

/// Window and threshold of the stagnation check.
pub const STAGNATION_WINDOW: usize = 1000;
pub const STAGNATION_TOL: f64 = 1e-6;

/// State shared by every epoch of a reconstruction.
struct Problem {
    layout: PointLayout,
    x1: RTensor,
    x2: RTensor,
    t1: RTensor,
    t2: RTensor,
    w1: f64,
    w2: f64,
}

struct Step {
    loss: f64,
    m1_error: f64,
    m2_error: f64,
    z: Vec<f64>,
    latent: Vec<f64>,
    grads: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>)>,
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn evaluate(p: &Problem, vol: &NeuralVolume, enc: &CryoEncoder, lambda: f64, want_grads: bool) -> Result<Step> {
    let mut tape = Tape::new();
    let vv = vol.params.vars(&mut tape);
    let ev = enc.params.vars_from(&mut tape, vol.params.len());
    let x1 = tape.constant(p.x1.clone());
    let x2 = tape.constant(p.x2.clone());
    let (z, latent) = enc.forward(&mut tape, &ev, x1, x2)?;
    let (m1, m2) = moments_on_tape(&mut tape, vol, &vv, &p.layout, z, latent)?;
    let t1 = tape.constant(p.t1.clone());
    let t2 = tape.constant(p.t2.clone());
    let d1 = tape.frob_dist(m1, t1)?;
    let d2 = tape.frob_dist(m2, t2)?;
    let a = tape.scale(d1, p.w1);
    let b = tape.scale(d2, lambda * p.w2);
    let loss = tape.add(a, b)?;
    let value = tape.scalar(loss);
    let grads = if want_grads && value.is_finite() {
        let mut lens = vol.params.lens();
        lens.extend(enc.params.lens());
        let mut all = tape.backward(loss)?.params(&lens);
        let enc_grads = all.split_off(vol.params.len());
        Some((all, enc_grads))
    } else {
        None
    };
    Ok(Step {
        loss: value,
        m1_error: rel(tape.value(m1), p.t1.data()),
        m2_error: rel(tape.value(m2), p.t2.data()),
        z: tape.value(z).to_vec(),
        latent: latent.map(|l| tape.value(l).to_vec()).unwrap_or_default(),
        grads,
    })
}

/// A spherically symmetric guess on the `n^3` frequency grid: the real
/// part of `m1` averaged over rings `round(|m|)`, linearly interpolated in
/// `|m|` and held constant past the last ring.
pub fn radial_profile_target(m: &CryoMomentPair) -> Vec<Complex64> {
    let n = m.n;
    let c = (n / 2) as f64;
    let ring = |iy: usize, ix: usize| ((iy as f64 - c).powi(2) + (ix as f64 - c).powi(2)).sqrt();
    let rings = ring(0, 0).round() as usize + 1;
    let (mut sum, mut count) = (vec![0.0; rings], vec![0usize; rings]);
    for iy in 0..n {
        for ix in 0..n {
            let r = ring(iy, ix).round() as usize;
            sum[r] += m.m1[iy * n + ix].re;
            count[r] += 1;
        }
    }
    let profile: Vec<f64> = sum.iter().zip(&count).map(|(s, &k)| s / k as f64).collect();
    let at = |r: f64| {
        let i = r.floor() as usize;
        if i + 1 >= rings {
            return profile[rings - 1];
        }
        let t = r - i as f64;
        profile[i] * (1.0 - t) + profile[i + 1] * t
    };
    let mut out = Vec::with_capacity(n * n * n);
    for iz in 0..n {
        for iy in 0..n {
            for ix in 0..n {
                let r = ((iz as f64 - c).powi(2) + (iy as f64 - c).powi(2) + (ix as f64 - c).powi(2)).sqrt();
                out.push(Complex64::new(at(r), 0.0));
            }
        }
    }
    out
}

/// Loss of fixed `(vol, enc)` against `target` without updating anything.
pub fn recon_loss(target: &CryoMomentPair, vol: &NeuralVolume, enc: &CryoEncoder, cfg: &CryoReconConfig) -> Result<f64> {
    let q = quadrature(cfg.q1, cfg.q2)?;
    let p = problem(target, &q, vol, cfg)?;
    Ok(evaluate(&p, vol, enc, cfg.lambda, false)?.loss)
}

fn problem(target: &CryoMomentPair, q: &QuadratureSet, vol: &NeuralVolume, cfg: &CryoReconConfig) -> Result<Problem> {
    target.check()?;
    let (x1, x2) = cryo_encoder_inputs(target)?;
    let (t1, t2) = moment_tensors(target);
    let (w1, w2) = if cfg.normalize {
        let n1 = t1.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        let n2 = t2.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        if n1 == 0.0 || n2 == 0.0 {
            return Err(CryoError::Invalid("cannot normalize by a zero moment".into()));
        }
        (1.0 / n1, 1.0 / n2)
    } else {
        (1.0, 1.0)
    };
    Ok(Problem { layout: quadrature_layout(q, target.n, vol.arch.octaves), x1, x2, t1, t2, w1, w2 })
}

/// Jointly fit a neural volume and the encoder (whose softmax output is
/// the density on the quadrature set) to the moments `target` by Adam on
/// `|m1 - M1| + lambda |m2 - M2|`.
///
/// `init` supplies a starting volume and encoder; by default both are
/// freshly initialized from `cfg.seed`, with the amplitude bias set from
/// the zero-frequency value of `m1`.
pub fn reconstruct(target: &CryoMomentPair, cfg: &CryoReconConfig, init: Option<(NeuralVolume, CryoEncoder)>) -> Result<CryoReconstruction> {
    cfg.validate()?;
    let n = target.n;
    let q = quadrature(cfg.q1, cfg.q2)?;
    let (mut vol, mut enc) = match init {
        Some((v, e)) => {
            if v.n != n || e.n != n || e.q != q.len() || e.latent != v.arch.latent {
                return Err(CryoError::Invalid("initial volume and encoder do not match the moments and quadrature".into()));
            }
            (v, e)
        }
        None => {
            let arch = NeuralArch { latent: cfg.latent, ..cfg.volume };
            let mut v = NeuralVolume::new(n, arch, cfg.seed)?;
            let dc = target.m1[(n / 2) * n + n / 2].norm();
            if dc > 0.0 {
                v.set_log_amplitude(dc.ln());
            }
            if cfg.init_epochs > 0 {
                let fit = FitConfig { schedule: vec![Stage { lr: 1e-3, epochs: cfg.init_epochs }], seed: cfg.seed, ..FitConfig::default() };
                fit_neural_gt(&radial_profile_target(target), &mut v, &fit)?;
            }
            (v, build_cryo_encoder(n, q.len(), cfg.latent, cfg.seed)?)
        }
    };
    let p = problem(target, &q, &vol, cfg)?;
    let mut adam_v = Adam::new(&vol.params);
    let mut adam_e = Adam::new(&enc.params);
    let mut trace = Vec::new();
    let mut stagnated_at = None;
    let mut epoch = 0;
    let mut last = None;
    for stage in &cfg.schedule {
        for _ in 0..stage.epochs {
            let step = evaluate(&p, &vol, &enc, cfg.lambda, true)?;
            if !step.loss.is_finite() {
                return Err(CryoError::Numerical(format!("reconstruction loss is not finite at epoch {epoch}")));
            }
            trace.push(CryoTraceRow { epoch, lr: stage.lr, loss: step.loss, m1_error: step.m1_error, m2_error: step.m2_error });
            if stagnated_at.is_none() && epoch >= STAGNATION_WINDOW {
                let before = trace[epoch - STAGNATION_WINDOW].loss;
                if before - step.loss < STAGNATION_TOL * before.abs() {
                    stagnated_at = Some(epoch);
                }
            }
            let (gv, ge) = step.grads.expect("gradients requested");
            adam_v.step(&mut vol.params, &gv, stage.lr)?;
            adam_e.step(&mut enc.params, &ge, stage.lr)?;
            epoch += 1;
            last = Some(stage.lr);
        }
    }
    let step = evaluate(&p, &vol, &enc, cfg.lambda, false)?;
    if !step.loss.is_finite() {
        return Err(CryoError::Numerical(format!("reconstruction loss is not finite at epoch {epoch}")));
    }
    trace.push(CryoTraceRow { epoch, lr: last.unwrap_or(0.0), loss: step.loss, m1_error: step.m1_error, m2_error: step.m2_error });
    vol.latent = step.latent;
    Ok(CryoReconstruction { volume: vol, encoder: enc, z_rho: QuadratureDensity { mass: step.z }, quadrature: q, trace, stagnated_at })
}
