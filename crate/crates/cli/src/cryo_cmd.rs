//! `fit-volume`, `simulate-cryoem`, `moments-cryoem`, `recon-cryoem`.

use std::path::{Path, PathBuf};

use orbit_core::{CTensor, RTensor, SeededRng};
use orbit_cryo::mrc::encode_mrc;
use orbit_cryo::slice::MomentKind;
use orbit_cryo::volume::{freq_grid_3d, grid_fourier, rasterize_fourier, GaussianBlob, GridVolume};
use orbit_cryo::*;
use orbit_nn::params::{decode_params, encode_params};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{default_seed, parse, to_value};
use crate::error::{CliError, Result};
use crate::mra_cmd::finite;
use crate::run::Run;

/// The volume a command works on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VolumeSource {
    /// The built-in four-blob mixture.
    Default,
    /// A Gaussian mixture in box units.
    Gaussian { components: Vec<GaussianBlob> },
    /// An MRC or OMT1 map; Fourier-cropped when larger than `n`. Slices
    /// are exact trigonometric sums, so this is slow for many images.
    Map { path: PathBuf },
    /// A neural volume saved by `fit-volume` or `recon-cryoem`.
    Neural { path: PathBuf },
}

pub enum LoadedVolume {
    Gaussian(GaussianVolumeSpec),
    Grid(GridVolume),
    Neural(NeuralVolume),
}

impl LoadedVolume {
    pub fn as_dyn(&self) -> &dyn FourierVolume {
        match self {
            LoadedVolume::Gaussian(g) => g,
            LoadedVolume::Grid(g) => g,
            LoadedVolume::Neural(v) => v,
        }
    }

    /// Voxel values on the `n^3` grid.
    pub fn raster(&self, n: usize) -> Result<RTensor> {
        Ok(match self {
            LoadedVolume::Gaussian(g) => g.rasterize()?,
            LoadedVolume::Grid(g) => g.values.clone(),
            LoadedVolume::Neural(v) => rasterize_fourier(v, n, true)?,
        })
    }

    /// `vhat` on the `n^3` frequency grid.
    pub fn fourier(&self, n: usize) -> Result<Vec<orbit_core::Complex64>> {
        Ok(match self {
            LoadedVolume::Grid(g) => grid_fourier(&g.values)?,
            other => other.as_dyn().eval_many(&freq_grid_3d(n)),
        })
    }
}

/// Load `src` for an `n`-voxel box, returning the voxel size of a map.
pub fn load_volume(run: &mut Run, src: &VolumeSource, n: usize) -> Result<(LoadedVolume, Option<f64>)> {
    match src {
        VolumeSource::Default => Ok((LoadedVolume::Gaussian(GaussianVolumeSpec::default_for(n)), None)),
        VolumeSource::Gaussian { components } => {
            let g = GaussianVolumeSpec { components: components.clone(), n };
            g.validate()?;
            Ok((LoadedVolume::Gaussian(g), None))
        }
        VolumeSource::Map { path } => {
            let (values, voxel) = run.read_volume(path)?;
            let map = MrcMap { data: values, voxel: voxel.unwrap_or(1.0) };
            let size = map.data.shape().first().copied().unwrap_or(0);
            let map = if size > n { fourier_crop(&map, n)? } else { map };
            if map.data.shape() != [n, n, n] {
                return Err(CliError::Schema(format!("map {} is {:?}, smaller than n = {n}", path.display(), map.data.shape())));
            }
            Ok((LoadedVolume::Grid(GridVolume::new(map.data)?), Some(map.voxel)))
        }
        VolumeSource::Neural { path } => {
            let v = load_neural(run, path)?;
            if v.n != n {
                return Err(CliError::Schema(format!("neural volume {} is for n = {}, not {n}", path.display(), v.n)));
            }
            Ok((LoadedVolume::Neural(v), None))
        }
    }
}

#[derive(Deserialize)]
struct VolumeHeader {
    n: usize,
    arch: NeuralArch,
    #[serde(default)]
    latent_values: Vec<f64>,
}

fn volume_bytes(v: &NeuralVolume) -> Result<Vec<u8>> {
    let mut header = v.header();
    header["latent_values"] = json!(v.latent);
    Ok(encode_params(&v.params, &header, v.init_seed)?)
}

pub fn load_neural(run: &mut Run, path: &Path) -> Result<NeuralVolume> {
    let bytes = run.read_bytes(path)?;
    let (header, params) = decode_params(&bytes)?;
    let h: VolumeHeader = serde_json::from_value(header.arch.clone()).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut v = NeuralVolume::new(h.n, h.arch, header.init_seed)?;
    if params.tensors.iter().map(RTensor::shape).ne(v.params.tensors.iter().map(RTensor::shape)) || h.latent_values.len() != h.arch.latent {
        return Err(CliError::Io(format!("{} does not match its recorded architecture", path.display())));
    }
    params.check_finite()?;
    v.params = params;
    v.latent = h.latent_values;
    Ok(v)
}

fn volume_meta(n: usize, voxel: f64) -> Value {
    json!({ "n": n, "voxel": voxel, "layout": "[z][y][x], x fastest" })
}

fn write_volume(run: &mut Run, stem: &str, values: &RTensor, voxel: f64) -> Result<()> {
    let n = values.shape()[0];
    run.write_real(&format!("{stem}.omt"), values, Some(volume_meta(n, voxel)))?;
    run.write_bytes(&format!("{stem}.mrc"), &encode_mrc(&MrcMap { data: values.clone(), voxel })?)
}

fn check_n(n: usize) -> Result<()> {
    if n < 2 {
        return Err(CliError::Schema(format!("n must be at least 2, got {n}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitVolume {
    pub n: usize,
    pub volume: VolumeSource,
    #[serde(default)]
    pub arch: NeuralArch,
    #[serde(default)]
    pub fit: FitConfig,
    /// Seed of the network initialization.
    #[serde(default)]
    pub init_seed: Option<u64>,
}

#[derive(Serialize)]
struct FitRow {
    epoch: usize,
    loss: f64,
    log10_loss: f64,
}

pub fn fit(run: &mut Run, value: &Value) -> Result<Value> {
    let mut value = value.clone();
    default_seed(&mut value, "/fit", run.seed)?;
    let mut cfg: FitVolume = parse(&value)?;
    check_n(cfg.n)?;
    let (src, voxel) = load_volume(run, &cfg.volume, cfg.n)?;
    let voxel = voxel.unwrap_or(1.0);
    let target = src.fourier(cfg.n)?;
    let mut vol = NeuralVolume::new(cfg.n, cfg.arch, *cfg.init_seed.get_or_insert(run.seed))?;
    let report = fit_neural_gt(&target, &mut vol, &cfg.fit)?;
    run.write_bytes("volume.params", &volume_bytes(&vol)?)?;
    write_volume(run, "volume", &rasterize_fourier(&vol, cfg.n, true)?, voxel)?;
    write_volume(run, "target", &src.raster(cfg.n)?, voxel)?;
    run.write_csv("loss.csv", report.loss.iter().enumerate().map(|(epoch, &loss)| FitRow { epoch, loss, log10_loss: loss.log10() }))?;
    run.write_json("report.json", &json!({ "approx_error": report.approx_error, "final_loss": report.loss.last().copied().map(finite) }))?;
    to_value(&cfg)
}

/// Root of the simulation streams; `simulate-cryoem` followed by
/// `moments-cryoem` on the images reproduces the streamed moments of
/// `moments-cryoem` in simulate mode for the same seed.
fn sim_rng(seed: u64) -> SeededRng {
    SeededRng::new(seed, "cryoem")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateCryo {
    pub n: usize,
    pub volume: VolumeSource,
    #[serde(default)]
    pub rotations: VmfMixtureSpec,
    pub count: usize,
    pub sigma: f64,
}

pub fn simulate(run: &mut Run, value: &Value) -> Result<Value> {
    let cfg: SimulateCryo = parse(value)?;
    check_n(cfg.n)?;
    let (vol, voxel) = load_volume(run, &cfg.volume, cfg.n)?;
    let rng = sim_rng(run.seed);
    let rots = sample_rotations(&cfg.rotations, cfg.count, &rng.child("rotations"))?;
    let images = simulate_images(vol.as_dyn(), &rots, cfg.n, cfg.sigma, &rng, &run.workers)?;
    let meta = json!({ "n": cfg.n, "count": cfg.count, "sigma": cfg.sigma });
    run.write_real("images.omt", &images, Some(meta))?;
    let flat: Vec<f64> = rots.iter().flat_map(|r| r.0.iter().flatten().copied().collect::<Vec<_>>()).collect();
    run.write_real("rotations.omt", &RTensor::new(vec![cfg.count, 3, 3], flat)?, None)?;
    write_volume(run, "volume", &vol.raster(cfg.n)?, voxel.unwrap_or(1.0))?;
    to_value(&cfg)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CryoMomentSource {
    Images {
        images: PathBuf,
        sigma: f64,
    },
    /// Stream images without storing them.
    Simulate {
        n: usize,
        volume: VolumeSource,
        #[serde(default)]
        rotations: VmfMixtureSpec,
        count: usize,
        sigma: f64,
    },
    /// Exact moments under the uniform density on a quadrature set.
    Quadrature {
        n: usize,
        volume: VolumeSource,
        q1: usize,
        q2: usize,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsCryo {
    pub source: CryoMomentSource,
}

pub fn moments(run: &mut Run, value: &Value) -> Result<Value> {
    let cfg: MomentsCryo = parse(value)?;
    let m = match &cfg.source {
        CryoMomentSource::Images { images, sigma } => {
            let batch = run.read_real(images)?;
            empirical_moments_2d(&batch, *sigma, &run.workers)?
        }
        CryoMomentSource::Simulate { n, volume, rotations, count, sigma } => {
            check_n(*n)?;
            let (vol, _) = load_volume(run, volume, *n)?;
            simulate_moments_2d(vol.as_dyn(), rotations, *n, *count, *sigma, &sim_rng(run.seed), &run.workers)?
        }
        CryoMomentSource::Quadrature { n, volume, q1, q2 } => {
            check_n(*n)?;
            let (vol, _) = load_volume(run, volume, *n)?;
            let q = quadrature(*q1, *q2)?;
            quadrature_moments(vol.as_dyn(), &QuadratureDensity::uniform(q.rotations.len()), &q, *n, &run.workers)?
        }
    };
    write_moments(run, &m)?;
    to_value(&cfg)
}

pub fn write_moments(run: &mut Run, m: &CryoMomentPair) -> Result<()> {
    let (n, d) = (m.n, m.n * m.n);
    let meta = json!({ "n": n, "kind": m.kind, "sigma": m.sigma, "count": m.count });
    run.write_complex("m1.omt", &CTensor::new(vec![n, n], m.m1.clone())?, Some(meta.clone()))?;
    run.write_complex("m2.omt", &CTensor::new(vec![d, d], m.m2.clone())?, Some(meta))
}

pub fn read_moments(run: &mut Run, dir: &Path) -> Result<CryoMomentPair> {
    let m1 = run.read_complex(&dir.join("m1.omt"))?;
    let m2 = run.read_complex(&dir.join("m2.omt"))?;
    let s = m1.shape().to_vec();
    if s.len() != 2 || s[0] != s[1] || m2.shape() != [s[0] * s[0], s[0] * s[0]] {
        return Err(CliError::Schema(format!("moments must be [n, n] and [n^2, n^2], got {:?} and {:?}", s, m2.shape())));
    }
    let meta = run.read_meta(&dir.join("m1.omt"))?;
    let kind = meta.get("kind").and_then(|k| serde_json::from_value(k.clone()).ok()).unwrap_or(MomentKind::Empirical);
    let m = CryoMomentPair {
        n: s[0],
        m1: m1.into_data(),
        m2: m2.into_data(),
        kind,
        sigma: meta.get("sigma").and_then(Value::as_f64),
        count: meta.get("count").and_then(Value::as_u64),
    };
    m.check()?;
    Ok(m)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconCryo {
    pub moments: PathBuf,
    #[serde(default)]
    pub recon: CryoReconConfig,
    /// Angstrom per voxel for the MRC output.
    #[serde(default = "unit")]
    pub voxel: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Serialize)]
struct TraceCsv {
    epoch: usize,
    lr: f64,
    loss: f64,
    m1_error: f64,
    m2_error: f64,
    log10_loss: f64,
    log10_m1_error: f64,
    log10_m2_error: f64,
}

pub fn recon(run: &mut Run, value: &Value) -> Result<Value> {
    let mut value = value.clone();
    default_seed(&mut value, "/recon", run.seed)?;
    let cfg: ReconCryo = parse(&value)?;
    if !(cfg.voxel > 0.0 && cfg.voxel.is_finite()) {
        return Err(CliError::Schema(format!("voxel must be positive, got {}", cfg.voxel)));
    }
    let m = read_moments(run, &cfg.moments)?;
    let res = reconstruct(&m, &cfg.recon, None)?;
    let n = m.n;
    run.write_bytes("volume.params", &volume_bytes(&res.volume)?)?;
    run.write_bytes("encoder.params", &encode_params(&res.encoder.params, &res.encoder.header(), res.encoder.init_seed)?)?;
    write_volume(run, "volume", &rasterize_fourier(&res.volume, n, true)?, cfg.voxel)?;
    run.write_real("z_rho.omt", &RTensor::from_vec(res.z_rho.mass.clone()), Some(json!({ "q1": cfg.recon.q1, "q2": cfg.recon.q2 })))?;
    let flat: Vec<f64> = res.quadrature.rotations.iter().flat_map(|r| r.0.iter().flatten().copied().collect::<Vec<_>>()).collect();
    run.write_real("quadrature.omt", &RTensor::new(vec![res.quadrature.rotations.len(), 3, 3], flat)?, None)?;
    run.write_csv(
        "trace.csv",
        res.trace.iter().map(|r| TraceCsv {
            epoch: r.epoch,
            lr: r.lr,
            loss: r.loss,
            m1_error: r.m1_error,
            m2_error: r.m2_error,
            log10_loss: r.loss.log10(),
            log10_m1_error: r.m1_error.log10(),
            log10_m2_error: r.m2_error.log10(),
        }),
    )?;
    let last = res.final_row();
    run.write_json(
        "report.json",
        &json!({
            "final": { "loss": last.loss, "m1_error": last.m1_error, "m2_error": last.m2_error },
            "stagnated_at": res.stagnated_at,
        }),
    )?;
    to_value(&cfg)
}
