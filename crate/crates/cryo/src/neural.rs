//! Coordinate-network volumes: `vhat(k) = exp(a(k)) exp(i b(k))` with `a`
//! and `b` small MLPs on sinusoidal features of `k`, symmetrized so that
//! `vhat(-k) = conj(vhat(k))` and cut to zero outside `|k| <= pi`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use orbit_core::{Complex64, RTensor, SeededRng};
use orbit_nn::{Adam, Chain, LayerSpec, Params, Sparse, Stage, Tape, Var};
use serde::{Deserialize, Serialize};

use crate::error::{CryoError, Result};
use crate::rotation::Vec3;
use crate::volume::{freq_grid_3d, FourierVolume};

/// Points per tape when evaluating outside of optimization.
const EVAL_BATCH: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuralArch {
    pub width: usize,
    pub depth: usize,
    pub octaves: usize,
    /// Width of the optional `z_v` latent appended to the features; 0 = off.
    pub latent: usize,
}

impl Default for NeuralArch {
    fn default() -> Self {
        Self { width: 64, depth: 3, octaves: 8, latent: 0 }
    }
}

impl NeuralArch {
    pub fn feature_width(&self) -> usize {
        3 + 6 * self.octaves
    }
}

/// Encoding of one frequency: `k / pi`, then `sin` and `cos` of `w_l k` per
/// axis with `w_l = (n/2) 2^(l - L + 1)`, so the top octave resolves
/// structure half a box away from the center.
pub fn posenc(k: Vec3, n: usize, octaves: usize, out: &mut Vec<f64>) {
    out.extend(k.iter().map(|x| x / PI));
    for l in 0..octaves {
        let w = 0.5 * n as f64 * 2f64.powi(l as i32 - octaves as i32 + 1);
        for x in k {
            let (s, c) = (w * x).sin_cos();
            out.extend([s, c]);
        }
    }
}

fn in_ball(k: &Vec3) -> bool {
    k[0] * k[0] + k[1] * k[1] + k[2] * k[2] <= PI * PI * (1.0 + 1e-12)
}

fn key(k: &Vec3) -> [i64; 3] {
    k.map(|x| (x * 1e9).round() as i64)
}

/// The distinct network inputs needed for a list of target frequencies and
/// the sparse map from raw network values `[P, 2]` to symmetrized outputs
/// `[targets, 2]`.
#[derive(Debug, Clone)]
pub struct PointLayout {
    pub points: Vec<Vec3>,
    pub features: RTensor,
    pub map: Arc<Sparse>,
    pub targets: usize,
}

impl PointLayout {
    pub fn new(targets: &[Vec3], n: usize, octaves: usize) -> Self {
        let mut index: HashMap<[i64; 3], usize> = HashMap::new();
        let mut points = Vec::new();
        let mut lookup = |k: Vec3, points: &mut Vec<Vec3>| {
            *index.entry(key(&k)).or_insert_with(|| {
                points.push(k);
                points.len() - 1
            })
        };
        let mut rows = Vec::with_capacity(targets.len());
        for k in targets {
            if in_ball(k) {
                let i = lookup(*k, &mut points);
                let j = lookup(k.map(|x| -x), &mut points);
                rows.push(Some((i, j)));
            } else {
                rows.push(None);
            }
        }
        let mut map = Sparse::new(2 * points.len());
        for r in rows {
            match r {
                None => {
                    map.push_row(&[]);
                    map.push_row(&[]);
                }
                Some((i, j)) if i == j => {
                    map.push_row(&[(2 * i, 1.0)]);
                    map.push_row(&[]);
                }
                Some((i, j)) => {
                    map.push_row(&[(2 * i, 0.5), (2 * j, 0.5)]);
                    map.push_row(&[(2 * i + 1, 0.5), (2 * j + 1, -0.5)]);
                }
            }
        }
        let fw = 3 + 6 * octaves;
        let mut feats = Vec::with_capacity(points.len() * fw);
        for p in &points {
            posenc(*p, n, octaves, &mut feats);
        }
        let features = RTensor::new(vec![points.len(), fw], feats).expect("feature shape");
        Self { points, features, map: Arc::new(map), targets: targets.len() }
    }
}

#[derive(Debug, Clone)]
pub struct NeuralVolume {
    pub n: usize,
    pub arch: NeuralArch,
    pub init_seed: u64,
    pub params: Params,
    /// Current `z_v` value used outside optimization; empty when off.
    pub latent: Vec<f64>,
    amplitude: Chain,
    phase: Chain,
}

impl NeuralVolume {
    pub fn new(n: usize, arch: NeuralArch, seed: u64) -> Result<Self> {
        if n < 2 || arch.width == 0 || arch.depth == 0 {
            return Err(CryoError::Invalid(format!("neural volume needs n >= 2 and a nonempty net, got n = {n}, {arch:?}")));
        }
        let mut specs = Vec::new();
        for _ in 0..arch.depth {
            specs.extend([LayerSpec::full(arch.width), LayerSpec::Tanh]);
        }
        specs.extend([LayerSpec::full(1), LayerSpec::Linear]);
        let input = [arch.feature_width() + arch.latent];
        let mut params = Params::default();
        let mut rng = SeededRng::new(seed, "neural_volume").stream(0);
        let amplitude = Chain::build("amplitude", &input, &specs, &mut params, &mut rng)?;
        let phase = Chain::build("phase", &input, &specs, &mut params, &mut rng)?;
        Ok(Self { n, arch, init_seed: seed, params, latent: vec![0.0; arch.latent], amplitude, phase })
    }

    pub fn header(&self) -> serde_json::Value {
        serde_json::json!({ "kind": "neural_volume", "n": self.n, "arch": self.arch })
    }

    fn last_bias(chain: &Chain) -> usize {
        *chain.param_indices().last().expect("chain has layers")
    }

    /// Set the output bias of the amplitude net, i.e. the log of the
    /// amplitude for an otherwise silent net.
    pub fn set_log_amplitude(&mut self, value: f64) {
        let i = Self::last_bias(&self.amplitude);
        self.params.tensors[i].data_mut()[0] = value;
    }

    /// Zero the last layer of both nets: a constant real volume
    /// `exp(log_amp)` in the Fourier domain.
    pub fn make_constant(&mut self, log_amp: f64) {
        for chain in [&self.amplitude, &self.phase] {
            for &i in chain.param_indices().iter().rev().take(2) {
                self.params.tensors[i].data_mut().iter_mut().for_each(|v| *v = 0.0);
            }
        }
        self.set_log_amplitude(log_amp);
    }

    /// Symmetrized values `[layout.targets, 2]` on `tape`. `latent` must be
    /// a `[latent]` var when the latent is enabled; `None` uses the stored
    /// value as a constant.
    pub fn on_tape(&self, tape: &mut Tape, vars: &[Var], layout: &PointLayout, latent: Option<Var>) -> Result<Var> {
        let p = layout.points.len();
        let mut x = tape.constant(layout.features.clone());
        if self.arch.latent > 0 {
            let w = self.arch.latent;
            let z = match latent {
                Some(z) => z,
                None => tape.constant(RTensor::from_vec(self.latent.clone())),
            };
            let src: Vec<usize> = (0..p).flat_map(|_| 0..w).collect();
            let tiled = tape.sparse(z, Arc::new(Sparse::gather(&src, w)), &[p, w])?;
            x = tape.concat(&[x, tiled])?;
        }
        let a = self.amplitude.forward(tape, vars, x)?;
        let b = self.phase.forward(tape, vars, x)?;
        let amp = tape.exp(a);
        let (c, s) = (tape.cos(b), tape.sin(b));
        let re = tape.mul(amp, c)?;
        let im = tape.mul(amp, s)?;
        let raw = tape.concat(&[re, im])?;
        Ok(tape.sparse(raw, layout.map.clone(), &[layout.targets, 2])?)
    }
}

impl FourierVolume for NeuralVolume {
    fn eval(&self, k: Vec3) -> Complex64 {
        self.eval_many(&[k])[0]
    }

    fn eval_many(&self, ks: &[Vec3]) -> Vec<Complex64> {
        let mut out = Vec::with_capacity(ks.len());
        for chunk in ks.chunks(EVAL_BATCH) {
            let layout = PointLayout::new(chunk, self.n, self.arch.octaves);
            let mut tape = Tape::new();
            let vars = self.params.vars(&mut tape);
            let y = self.on_tape(&mut tape, &vars, &layout, None).expect("shapes fixed at construction");
            out.extend(tape.value(y).chunks(2).map(|c| Complex64::new(c[0], c[1])));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub schedule: Vec<Stage>,
    /// Frequencies per step; the whole ball when it fits.
    pub batch: usize,
    pub seed: u64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { schedule: vec![Stage { lr: 1e-3, epochs: 3000 }, Stage { lr: 1e-4, epochs: 1000 }], batch: 8192, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Mean squared error per epoch.
    pub loss: Vec<f64>,
    /// `|vhat_fit - vhat_target| / |vhat_target|` over the `n^3` grid
    /// frequencies, which equals the real-space relative error of the
    /// rasterized volumes. `None` for a zero target.
    pub approx_error: Option<f64>,
}

/// Relative distance between two sets of grid Fourier values, `None` when
/// the reference vanishes.
pub fn relative_error_values(estimate: &[Complex64], reference: &[Complex64]) -> Option<f64> {
    let den: f64 = reference.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let num: f64 = estimate.iter().zip(reference).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    (den > 0.0).then(|| num / den)
}

/// Least-squares fit of `vol` to `target` given on the `n^3` grid
/// frequencies (`[iz][iy][ix]`); only frequencies in the ball are fitted.
pub fn fit_neural_gt(target: &[Complex64], vol: &mut NeuralVolume, cfg: &FitConfig) -> Result<FitReport> {
    let n = vol.n;
    if target.len() != n * n * n {
        return Err(CryoError::Shape(format!("{} target values for n = {n}", target.len())));
    }
    if cfg.batch == 0 || cfg.schedule.iter().any(|s| !(s.lr > 0.0 && s.lr.is_finite())) {
        return Err(CryoError::Invalid("fit needs a positive batch size and learning rates".into()));
    }
    let grid = freq_grid_3d(n);
    let ball: Vec<usize> = (0..grid.len()).filter(|&i| in_ball(&grid[i])).collect();
    let batches: Vec<&[usize]> = ball.chunks(cfg.batch).collect();
    let layouts: Vec<PointLayout> = batches
        .iter()
        .map(|b| PointLayout::new(&b.iter().map(|&i| grid[i]).collect::<Vec<_>>(), n, vol.arch.octaves))
        .collect();
    let goals: Vec<RTensor> = batches
        .iter()
        .map(|b| RTensor::new(vec![b.len(), 2], b.iter().flat_map(|&i| [target[i].re, target[i].im]).collect()).expect("shape"))
        .collect();
    let mut adam = Adam::new(&vol.params);
    let mut order: Vec<usize> = (0..batches.len()).collect();
    let mut shuffle = SeededRng::new(cfg.seed, "fit_neural_gt").stream(0);
    let mut loss = Vec::new();
    for stage in &cfg.schedule {
        for _ in 0..stage.epochs {
            rand::seq::SliceRandom::shuffle(order.as_mut_slice(), &mut shuffle);
            let mut total = 0.0;
            for &bi in &order {
                let mut tape = Tape::new();
                let vars = vol.params.vars(&mut tape);
                let y = vol.on_tape(&mut tape, &vars, &layouts[bi], None)?;
                let t = tape.constant(goals[bi].clone());
                let l = tape.mse(y, t)?;
                let value = tape.scalar(l);
                if !value.is_finite() {
                    return Err(CryoError::Numerical(format!("neural fit diverged at epoch {}", loss.len())));
                }
                total += value * batches[bi].len() as f64;
                let grads = tape.backward(l)?.params(&vol.params.lens());
                adam.step(&mut vol.params, &grads, stage.lr)?;
            }
            loss.push(total / ball.len() as f64);
        }
    }
    let fitted = vol.eval_many(&grid);
    Ok(FitReport { loss, approx_error: relative_error_values(&fitted, target) })
}
