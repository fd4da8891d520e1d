//! `simulate-mra`, `moments-mra`, `invert-spectral`, `make-dataset`,
//! `train-encoder`, `recon-mra`.

use std::path::{Path, PathBuf};

use orbit_core::{CTensor, Complex64, RTensor, SeededRng};
use orbit_mra::encoder::Head;
use orbit_mra::mixture::Component;
use orbit_mra::recon::Truth;
use orbit_mra::*;
use orbit_nn::params::{decode_params, encode_params};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{default_seed, parse, to_value};
use crate::error::{CliError, Result};
use crate::run::Run;

/// Where a signal or density on the `n`-point grid comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape1D {
    Mixture {
        components: Vec<Component>,
        #[serde(default = "yes")]
        wrap: bool,
    },
    /// One draw from a random mixture family.
    Random { family: MixtureFamily },
    Uniform,
    /// All mass at shift zero (densities only).
    Delta,
}

fn yes() -> bool {
    true
}

impl Shape1D {
    fn spec(&self, rng: &SeededRng) -> Result<Option<MixtureSpec1D>> {
        Ok(match self {
            Shape1D::Mixture { components, wrap } => Some(MixtureSpec1D { components: components.clone(), wrap: *wrap }),
            Shape1D::Random { family } => Some(family.sample(&mut rng.stream(0))?),
            Shape1D::Uniform | Shape1D::Delta => None,
        })
    }

    fn signal(&self, n: usize, rng: &SeededRng) -> Result<MraSignal> {
        match self.spec(rng)? {
            Some(s) => Ok(s.signal(n)?),
            None if matches!(self, Shape1D::Uniform) => Ok(MraSignal::from_real(vec![1.0 / n as f64; n])?),
            None => Err(CliError::Schema("a signal cannot be a delta".into())),
        }
    }

    fn density(&self, n: usize, rng: &SeededRng) -> Result<MraDensity> {
        match self.spec(rng)? {
            Some(s) => Ok(s.density(n)?),
            None if matches!(self, Shape1D::Uniform) => Ok(MraDensity::uniform(n)),
            None => Ok(MraDensity::delta(n)),
        }
    }
}

fn grid_meta(n: usize) -> Value {
    json!({ "n": n, "grid": "centered", "frequencies": "2 pi (i - n/2) / n" })
}

fn complex_tensor(shape: Vec<usize>, v: &[Complex64]) -> Result<CTensor> {
    Ok(CTensor::new(shape, v.to_vec())?)
}

/// Write signal values, Fourier coefficients and density.
fn write_truth(run: &mut Run, v: &MraSignal, rho: &MraDensity) -> Result<()> {
    let n = v.n;
    run.write_real("signal.omt", &RTensor::from_vec(v.values.clone()), Some(grid_meta(n)))?;
    run.write_complex("signal_fourier.omt", &complex_tensor(vec![n], &v.fourier)?, Some(grid_meta(n)))?;
    run.write_real("density.omt", &RTensor::from_vec(rho.mass.clone()), Some(grid_meta(n)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateMra {
    pub n: usize,
    pub signal: Shape1D,
    pub density: Shape1D,
    pub count: usize,
    pub sigma: f64,
    #[serde(default = "yes")]
    pub save_observations: bool,
}

pub fn simulate(run: &mut Run, value: &Value) -> Result<Value> {
    let cfg: SimulateMra = parse(value)?;
    if cfg.n < 2 {
        return Err(CliError::Schema("n must be at least 2".into()));
    }
    let root = SeededRng::new(run.seed, "simulate-mra");
    let v = cfg.signal.signal(cfg.n, &root.child("signal"))?;
    let rho = cfg.density.density(cfg.n, &root.child("density"))?;
    write_truth(run, &v, &rho)?;
    let obs_rng = root.child("observations");
    let m = simulate_moments(&v, &rho, cfg.count, cfg.sigma, &obs_rng, &run.workers)?;
    write_moments(run, &m)?;
    if cfg.save_observations {
        let obs = simulate_observations(&v, &rho, cfg.count, cfg.sigma, &obs_rng, &run.workers)?;
        run.write_real("observations.omt", &obs.rows, Some(json!({ "n": cfg.n, "count": cfg.count, "sigma": cfg.sigma })))?;
    }
    to_value(&cfg)
}

fn write_moments(run: &mut Run, m: &MomentPair) -> Result<()> {
    let n = m.n();
    let meta = json!({ "n": n, "kind": m.kind, "sigma": m.sigma, "count": m.count });
    run.write_complex("m1.omt", &complex_tensor(vec![n], &m.m1)?, Some(meta.clone()))?;
    run.write_complex("m2.omt", &complex_tensor(vec![n, n], &m.m2)?, Some(meta))
}

/// `m1.omt` and `m2.omt` from a directory written by `moments-mra` or
/// `simulate-mra`.
pub fn read_moments(run: &mut Run, dir: &Path) -> Result<MomentPair> {
    let m1 = run.read_complex(&dir.join("m1.omt"))?;
    let m2 = run.read_complex(&dir.join("m2.omt"))?;
    let n = m1.len();
    if m1.rank() != 1 || m2.shape() != [n, n] {
        return Err(CliError::Schema(format!("moments must be [n] and [n, n], got {:?} and {:?}", m1.shape(), m2.shape())));
    }
    let meta = run.read_meta(&dir.join("m1.omt"))?;
    let kind = meta.get("kind").and_then(|k| serde_json::from_value(k.clone()).ok()).unwrap_or(MomentKind::Empirical);
    let m = MomentPair {
        m1: m1.into_data(),
        m2: m2.into_data(),
        kind,
        sigma: meta.get("sigma").and_then(Value::as_f64),
        count: meta.get("count").and_then(Value::as_u64),
    };
    m.check()?;
    Ok(m)
}

fn read_signal(run: &mut Run, path: &Path) -> Result<MraSignal> {
    let t = run.read_real(path)?;
    if t.rank() != 1 {
        return Err(CliError::Schema(format!("{} must hold a 1D signal", path.display())));
    }
    Ok(MraSignal::from_real(t.into_data())?)
}

fn read_density(run: &mut Run, path: &Path) -> Result<MraDensity> {
    let t = run.read_real(path)?;
    if t.rank() != 1 {
        return Err(CliError::Schema(format!("{} must hold a 1D density", path.display())));
    }
    Ok(MraDensity::new(t.into_data())?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MomentSource {
    /// Unbiased estimates from a saved observation batch.
    Observations { observations: PathBuf, sigma: f64 },
    /// Exact moments of a signal and density.
    Analytic { signal: PathBuf, density: PathBuf },
    /// Stream observations without storing them.
    Simulate { signal: PathBuf, density: PathBuf, count: usize, sigma: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsMra {
    pub source: MomentSource,
}

pub fn moments(run: &mut Run, value: &Value) -> Result<Value> {
    let cfg: MomentsMra = parse(value)?;
    let m = match &cfg.source {
        MomentSource::Observations { observations, sigma } => {
            let batch = run.read_real(observations)?;
            if batch.rank() != 2 {
                return Err(CliError::Schema("observations must be [count, n]".into()));
            }
            empirical_moments(&batch, *sigma, &run.workers)?
        }
        MomentSource::Analytic { signal, density } => {
            let v = read_signal(run, signal)?;
            let rho = read_density(run, density)?;
            analytic_moments(&v, &rho)?
        }
        MomentSource::Simulate { signal, density, count, sigma } => {
            let v = read_signal(run, signal)?;
            let rho = read_density(run, density)?;
            let rng = SeededRng::new(run.seed, "moments-mra").child("observations");
            simulate_moments(&v, &rho, *count, *sigma, &rng, &run.workers)?
        }
    };
    write_moments(run, &m)?;
    to_value(&cfg)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvertSpectral {
    pub moments: PathBuf,
    /// Use `m1` to fix the phase ambiguity of the recovered coefficients.
    #[serde(default = "yes")]
    pub use_m1: bool,
    #[serde(default)]
    pub options: SpectralOptions,
}

pub fn invert(run: &mut Run, value: &Value) -> Result<Value> {
    let cfg: InvertSpectral = parse(value)?;
    let m = read_moments(run, &cfg.moments)?;
    let res = spectral_invert(&m.m2, cfg.use_m1.then_some(m.m1.as_slice()), &cfg.options)?;
    let n = m.n();
    let v = MraSignal::from_fourier(res.vhat.clone())?;
    run.write_complex("signal_fourier.omt", &complex_tensor(vec![n], &res.vhat)?, Some(grid_meta(n)))?;
    run.write_real("signal.omt", &RTensor::from_vec(v.values), Some(grid_meta(n)))?;
    run.write_real("density.omt", &RTensor::from_vec(res.rho.clone()), Some(grid_meta(n)))?;
    run.write_real("eigenvalues.omt", &RTensor::from_vec(res.eigenvalues.clone()), None)?;
    run.write_json("report.json", &json!({ "min_gap": res.min_gap, "degenerate": res.degenerate }))?;
    to_value(&cfg)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MakeDataset {
    pub n: usize,
    pub family: MixtureFamily,
    pub count: usize,
}

pub fn dataset(run: &mut Run, value: &Value) -> Result<Value> {
    let cfg: MakeDataset = parse(value)?;
    let d = make_dataset(&cfg.family, cfg.count, cfg.n, &SeededRng::new(run.seed, "make-dataset"))?;
    let meta = json!({ "n": cfg.n, "count": cfg.count, "family": cfg.family });
    run.write_real("rho.omt", &RTensor::new(vec![cfg.count, cfg.n], d.rho.concat())?, Some(meta.clone()))?;
    run.write_complex("vhat.omt", &CTensor::new(vec![cfg.count, cfg.n], d.vhat.concat())?, Some(meta))?;
    to_value(&cfg)
}

fn read_dataset(run: &mut Run, dir: &Path) -> Result<Dataset> {
    let rho = run.read_real(&dir.join("rho.omt"))?;
    let vhat = run.read_complex(&dir.join("vhat.omt"))?;
    if rho.rank() != 2 || vhat.shape() != rho.shape() {
        return Err(CliError::Schema(format!("dataset tensors must both be [count, n], got {:?} and {:?}", rho.shape(), vhat.shape())));
    }
    let n = rho.shape()[1];
    Ok(Dataset {
        n,
        rho: rho.data().chunks(n).map(<[f64]>::to_vec).collect(),
        vhat: vhat.data().chunks(n).map(<[Complex64]>::to_vec).collect(),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainEncoder {
    pub dataset: PathBuf,
    pub head: Head,
    /// Defaults to the standard architecture for the dataset's `n`.
    #[serde(default)]
    pub arch: Option<EncoderArch>,
    /// Seed of the weight initialization.
    #[serde(default)]
    pub init_seed: Option<u64>,
    /// `dataset_size` caps how many leading examples are used.
    pub train: TrainConfig,
}

#[derive(Serialize)]
struct LossRow {
    epoch: usize,
    loss: f64,
    log10_loss: f64,
}

pub fn train(run: &mut Run, value: &Value) -> Result<Value> {
    let mut value = value.clone();
    default_seed(&mut value, "/train", run.seed)?;
    let mut cfg: TrainEncoder = parse(&value)?;
    let mut data = read_dataset(run, &cfg.dataset)?;
    if cfg.train.dataset_size > data.len() {
        return Err(CliError::Schema(format!("dataset_size {} exceeds the {} stored examples", cfg.train.dataset_size, data.len())));
    }
    data.rho.truncate(cfg.train.dataset_size);
    data.vhat.truncate(cfg.train.dataset_size);
    let arch = cfg.arch.clone().unwrap_or_else(|| EncoderArch::default_for(data.n));
    let init_seed = *cfg.init_seed.get_or_insert(run.seed);
    let mut enc = build_encoder(data.n, cfg.head, &arch, init_seed)?;
    let report = train_supervised(&mut enc, &data, &cfg.train)?;
    run.write_bytes("encoder.params", &encode_params(&enc.params, &enc.header(), enc.init_seed)?)?;
    run.write_csv("loss.csv", report.epoch_loss.iter().enumerate().map(|(epoch, &loss)| LossRow { epoch, loss, log10_loss: loss.log10() }))?;
    run.write_json("report.json", &json!({ "train_error": report.train_error, "test_error": report.test_error, "parameters": enc.size() }))?;
    cfg.arch = Some(arch);
    to_value(&cfg)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EncoderHeader {
    #[allow(dead_code)]
    model: String,
    n: usize,
    head: Head,
    arch: EncoderArch,
}

pub fn load_encoder(run: &mut Run, path: &Path) -> Result<Encoder> {
    let bytes = run.read_bytes(path)?;
    let (header, params) = decode_params(&bytes)?;
    let h: EncoderHeader = parse(&header.arch)?;
    let mut enc = build_encoder(h.n, h.head, &h.arch, header.init_seed)?;
    if params.lens() != enc.params.lens() || params.tensors.iter().zip(&enc.params.tensors).any(|(a, b)| a.shape() != b.shape()) {
        return Err(CliError::Schema(format!("{} does not match its recorded architecture", path.display())));
    }
    params.check_finite()?;
    enc.params = params;
    Ok(enc)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthFiles {
    pub signal: PathBuf,
    pub density: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconMra {
    pub moments: PathBuf,
    /// Trained encoders for a warm start; both absent means a cold start
    /// from fresh weights.
    #[serde(default)]
    pub encoder_v: Option<PathBuf>,
    #[serde(default)]
    pub encoder_rho: Option<PathBuf>,
    /// Architecture for a cold start.
    #[serde(default)]
    pub arch: Option<EncoderArch>,
    #[serde(default)]
    pub recon: ReconConfig,
    /// Ground truth for error columns in the trace.
    #[serde(default)]
    pub truth: Option<TruthFiles>,
}

#[derive(Serialize)]
struct ReconRow {
    iteration: usize,
    loss: f64,
    m1_error: f64,
    m2_error: f64,
    signal_error: f64,
    density_error: f64,
    log10_loss: f64,
    log10_signal_error: f64,
    log10_density_error: f64,
}

pub fn recon(run: &mut Run, value: &Value) -> Result<Value> {
    let cfg: ReconMra = parse(value)?;
    let m = read_moments(run, &cfg.moments)?;
    let n = m.n();
    let (mut ev, mut er) = match (&cfg.encoder_v, &cfg.encoder_rho) {
        (Some(a), Some(b)) => (load_encoder(run, a)?, load_encoder(run, b)?),
        (None, None) => {
            let arch = cfg.arch.clone().unwrap_or_else(|| EncoderArch::default_for(n));
            (build_encoder(n, Head::V, &arch, run.seed)?, build_encoder(n, Head::Rho, &arch, run.seed)?)
        }
        _ => return Err(CliError::Schema("give both encoder_v and encoder_rho, or neither".into())),
    };
    let truth = match &cfg.truth {
        Some(t) => Some((read_signal(run, &t.signal)?, read_density(run, &t.density)?)),
        None => None,
    };
    let res = refine(&mut ev, &mut er, &m.m1, &m.m2, &cfg.recon, truth.as_ref().map(|(v, r)| Truth { vhat: &v.fourier, rho: &r.mass }))?;
    let v = MraSignal::from_fourier(res.z_v.clone())?;
    run.write_complex("signal_fourier.omt", &complex_tensor(vec![n], &res.z_v)?, Some(grid_meta(n)))?;
    run.write_real("signal.omt", &RTensor::from_vec(v.values), Some(grid_meta(n)))?;
    run.write_real("density.omt", &RTensor::from_vec(res.z_rho.clone()), Some(grid_meta(n)))?;
    run.write_csv(
        "trace.csv",
        res.trace.iter().map(|r| ReconRow {
            iteration: r.iteration,
            loss: r.loss,
            m1_error: r.m1_error,
            m2_error: r.m2_error,
            signal_error: r.signal_error,
            density_error: r.density_error,
            log10_loss: r.loss.log10(),
            log10_signal_error: r.signal_error.log10(),
            log10_density_error: r.density_error.log10(),
        }),
    )?;
    for (name, enc) in [("encoder_v.params", &ev), ("encoder_rho.params", &er)] {
        run.write_bytes(name, &encode_params(&enc.params, &enc.header(), enc.init_seed)?)?;
    }
    let last = res.trace.last().expect("trace has a final row");
    run.write_json(
        "report.json",
        &json!({
            "rotation": res.rotation,
            "final": { "loss": last.loss, "m1_error": last.m1_error, "m2_error": last.m2_error,
                        "signal_error": finite(last.signal_error), "density_error": finite(last.density_error) },
        }),
    )?;
    to_value(&cfg)
}

/// JSON has no NaN; missing values become `null`.
pub fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}
