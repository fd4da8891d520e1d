//! Supervised training of one encoder head on a [`Dataset`].

use orbit_core::{Complex64, SeededRng};
use orbit_nn::{Adam, Stage, Tape};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::encoder::{encoder_inputs, output_scale, Encoder, Head};
use crate::error::{MraError, Result};
use crate::metrics::{relative_error_fourier, relative_error_signal};
use crate::moments::MomentPair;
use crate::signal::{rotate, shift_fourier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset_size: usize,
    pub test_fraction: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub schedule: Vec<Stage>,
    pub seed: u64,
    /// Standard deviation of Gaussian noise added to the scaled network
    /// inputs; zero trains on clean moments.
    #[serde(default)]
    pub augment_sigma: f64,
}

fn default_batch() -> usize {
    128
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(MraError::Invalid("batch size must be positive".into()));
        }
        if let Some(s) = self.schedule.iter().find(|s| !(s.lr > 0.0 && s.lr.is_finite())) {
            return Err(MraError::Invalid(format!("learning rate must be positive, got {}", s.lr)));
        }
        if !(self.augment_sigma >= 0.0 && self.augment_sigma.is_finite()) {
            return Err(MraError::Invalid("augmentation noise must be >= 0".into()));
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return Err(MraError::Invalid(format!("test fraction must be in [0, 1), got {}", self.test_fraction)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss per epoch.
    pub epoch_loss: Vec<f64>,
    pub train_error: f64,
    pub test_error: f64,
}

/// Raw-unit target for example `i` (what `forward_raw` should produce).
fn raw_target(data: &Dataset, head: Head, i: usize) -> Vec<f64> {
    let inv = 1.0 / output_scale(data.n, head);
    match head {
        Head::Rho => data.rho[i].iter().map(|r| r * inv).collect(),
        Head::V => data.vhat[i].iter().flat_map(|c| [c.re * inv, c.im * inv]).collect(),
    }
}

/// The integer shift of `target` closest to `out`. The moments only fix the
/// signal and the density up to a shift each head may resolve differently.
fn aligned(target: &[f64], out: &[f64], head: Head, n: usize) -> Vec<f64> {
    let candidates: Box<dyn Iterator<Item = Vec<f64>>> = match head {
        Head::Rho => Box::new((0..n as i64).map(move |o| rotate(target, o))),
        Head::V => {
            let c: Vec<Complex64> = target.chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
            Box::new((0..n).map(move |o| shift_fourier(&c, o as f64 / n as f64).iter().flat_map(|z| [z.re, z.im]).collect()))
        }
    };
    let dist = |t: &[f64]| t.iter().zip(out).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for t in candidates {
        let d = dist(&t);
        if best.as_ref().is_none_or(|b| d < b.0) {
            best = Some((d, t));
        }
    }
    best.expect("n >= 1").1
}

/// Mean shift-aligned relative error of the head's predictions on `data`.
pub fn evaluate(enc: &Encoder, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for start in (0..data.len()).step_by(512) {
        let idx: Vec<usize> = (start..(start + 512).min(data.len())).collect();
        let pairs: Vec<MomentPair> = idx.iter().map(|&i| data.moments(i)).collect();
        let preds = enc.predict(&pairs.iter().collect::<Vec<_>>())?;
        for (p, &i) in preds.iter().zip(&idx) {
            total += match enc.head {
                Head::Rho => relative_error_signal(p, &data.rho[i])?,
                Head::V => {
                    let z: Vec<Complex64> = p.chunks(2).map(|q| Complex64::new(q[0], q[1])).collect();
                    relative_error_fourier(&z, &data.vhat[i])?
                }
            };
        }
    }
    Ok(total / data.len() as f64)
}

/// Minimize the shift-aligned mean squared error between the head output and
/// the targets with Adam over the configured `(lr, epochs)` stages, then
/// report mean relative errors on the train and test parts of `data`.
pub fn train_supervised(enc: &mut Encoder, data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(MraError::Invalid("dataset is empty".into()));
    }
    if data.n != enc.n {
        return Err(MraError::Shape(format!("encoder is for n = {}, dataset has n = {}", enc.n, data.n)));
    }
    let (train, test) = data.split(cfg.test_fraction)?;
    if train.is_empty() {
        return Err(MraError::Invalid("no training examples after the test split".into()));
    }
    let (n, head) = (enc.n, enc.head);
    let width = head.width(n);
    let rng = SeededRng::new(cfg.seed, "train");
    let mut adam = Adam::new(&enc.params);
    let lens = enc.params.lens();
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_loss = Vec::new();
    let mut epoch = 0u64;
    for stage in &cfg.schedule {
        for _ in 0..stage.epochs {
            let mut stream = rng.stream(epoch);
            order.shuffle(&mut stream);
            let (mut sum, mut batches) = (0.0, 0usize);
            for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
                let pairs: Vec<MomentPair> = batch.iter().map(|&i| train.moments(i)).collect();
                let (mut x1, mut x2) = encoder_inputs(&pairs.iter().collect::<Vec<_>>())?;
                if cfg.augment_sigma > 0.0 {
                    for v in x1.data_mut().iter_mut().chain(x2.data_mut().iter_mut()) {
                        let g: f64 = StandardNormal.sample(&mut stream);
                        *v += cfg.augment_sigma * g;
                    }
                }
                let mut tape = Tape::new();
                let vars = enc.params.vars(&mut tape);
                let a = tape.constant(x1);
                let b = tape.constant(x2);
                let y = enc.forward_raw(&mut tape, &vars, a, b)?;
                let out = tape.value(y).to_vec();
                let mut target = Vec::with_capacity(batch.len() * width);
                for (r, &i) in batch.iter().enumerate() {
                    target.extend(aligned(&raw_target(&train, head, i), &out[r * width..(r + 1) * width], head, n));
                }
                let t = tape.constant(orbit_core::RTensor::new(vec![batch.len(), width], target)?);
                let loss = tape.mse(y, t)?;
                let value = tape.scalar(loss);
                if !value.is_finite() {
                    return Err(MraError::Numerical(format!("training loss became {value} at epoch {epoch}, batch {bi}")));
                }
                let grads = tape.backward(loss)?.params(&lens);
                adam.step(&mut enc.params, &grads, stage.lr)?;
                sum += value;
                batches += 1;
            }
            epoch_loss.push(sum / batches as f64);
            epoch += 1;
        }
    }
    Ok(TrainReport { epoch_loss, train_error: evaluate(enc, &train)?, test_error: evaluate(enc, &test)? })
}
