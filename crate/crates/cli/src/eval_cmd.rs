//! `eval-fsc` and `eval-error`.

use std::path::{Path, PathBuf};

use orbit_core::tensor::{cdist, cnorm};
use orbit_cryo::eval::default_search_grid;
use orbit_cryo::*;
use orbit_mra::metrics::relative_error_signal;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{parse, to_value};
use crate::error::{CliError, Result};
use crate::run::Run;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchGrid {
    pub q1: usize,
    pub q2: usize,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self { q1: 100, q2: 12 }
    }
}

impl SearchGrid {
    fn rotations(&self) -> Result<Vec<Rotation>> {
        if (self.q1, self.q2) == (100, 12) {
            return Ok(default_search_grid());
        }
        Ok(quadrature(self.q1, self.q2)?.rotations)
    }
}

fn threshold() -> f64 {
    0.5
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalFsc {
    /// Reference volume (MRC or OMT1).
    pub a: PathBuf,
    /// Volume compared against `a`, aligned to it first when `align` is set.
    pub b: PathBuf,
    /// Angstrom per voxel; defaults to the MRC header of `a`, else 1.
    #[serde(default)]
    pub voxel: Option<f64>,
    #[serde(default = "yes")]
    pub align: bool,
    #[serde(default)]
    pub align_options: AlignOptions,
    #[serde(default)]
    pub search: SearchGrid,
    #[serde(default = "threshold")]
    pub threshold: f64,
}

#[derive(Serialize)]
struct FscRow {
    shell: usize,
    /// Spatial frequency in 1/Angstrom.
    frequency: f64,
    fsc: f64,
}

pub fn fsc_cmd(run: &mut Run, value: &Value) -> Result<Value> {
    let mut cfg: EvalFsc = parse(value)?;
    let (a, va) = run.read_volume(&cfg.a)?;
    let (b, _) = run.read_volume(&cfg.b)?;
    let voxel = *cfg.voxel.get_or_insert(va.unwrap_or(1.0));
    if !(voxel > 0.0 && voxel.is_finite()) {
        return Err(CliError::Schema(format!("voxel must be positive, got {voxel}")));
    }
    let (b, alignment) = if cfg.align {
        let al = align_volumes(&a, &b, &cfg.search.rotations()?, cfg.align_options, &run.workers)?;
        (al.apply(&b)?, Some(al))
    } else {
        (b, None)
    };
    let curve = fsc(&a, &b, voxel)?;
    let n = curve.n as f64;
    run.write_csv(
        "fsc.csv",
        curve.radii.iter().zip(&curve.values).map(|(&r, &v)| FscRow { shell: r, frequency: r as f64 / (n * voxel), fsc: v }),
    )?;
    if cfg.align {
        run.write_real("aligned.omt", &b, Some(json!({ "n": curve.n, "voxel": voxel })))?;
    }
    let res = curve.resolution(cfg.threshold);
    run.write_json(
        "report.json",
        &json!({
            "resolution": if res.is_finite() { json!(res) } else { Value::Null },
            "resolution_voxels": if res.is_finite() { json!(res / voxel) } else { Value::Null },
            "threshold": cfg.threshold,
            "nyquist": 2.0 * voxel,
            "alignment": alignment,
        }),
    )?;
    to_value(&cfg)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EvalError {
    /// 1D signals or densities, minimized over cyclic shifts.
    Signal { estimate: PathBuf, reference: PathBuf },
    /// Volumes, optionally minimized over rotations, reflection and shifts.
    Volume {
        estimate: PathBuf,
        reference: PathBuf,
        #[serde(default = "yes")]
        align: bool,
        #[serde(default)]
        align_options: AlignOptions,
        #[serde(default)]
        search: SearchGrid,
    },
    /// Moment directories (MRA or cryo-EM).
    Moments { estimate: PathBuf, reference: PathBuf },
}

fn read_pair(run: &mut Run, dir: &Path) -> Result<(Vec<orbit_core::Complex64>, Vec<orbit_core::Complex64>)> {
    Ok((run.read_complex(&dir.join("m1.omt"))?.into_data(), run.read_complex(&dir.join("m2.omt"))?.into_data()))
}

fn relative(a: &[orbit_core::Complex64], b: &[orbit_core::Complex64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(CliError::Schema(format!("moment sizes differ: {} vs {}", a.len(), b.len())));
    }
    let d = cnorm(b);
    if d == 0.0 {
        return Err(CliError::Schema("reference moment is zero".into()));
    }
    Ok(cdist(a, b) / d)
}

pub fn error_cmd(run: &mut Run, value: &Value) -> Result<Value> {
    let cfg: EvalError = parse(value)?;
    let report = match &cfg {
        EvalError::Signal { estimate, reference } => {
            let u = run.read_real(estimate)?;
            let v = run.read_real(reference)?;
            if u.rank() != 1 || u.shape() != v.shape() {
                return Err(CliError::Schema(format!("signals must be 1D of equal length, got {:?} and {:?}", u.shape(), v.shape())));
            }
            json!({ "relative_error": relative_error_signal(u.data(), v.data())? })
        }
        EvalError::Volume { estimate, reference, align, align_options, search } => {
            let (u, _) = run.read_volume(estimate)?;
            let (v, _) = run.read_volume(reference)?;
            if *align {
                let al = align_volumes(&v, &u, &search.rotations()?, *align_options, &run.workers)?;
                json!({ "relative_error": al.error, "alignment": al })
            } else {
                json!({ "relative_error": relative_error_volume(&u, &v)? })
            }
        }
        EvalError::Moments { estimate, reference } => {
            let (a1, a2) = read_pair(run, estimate)?;
            let (b1, b2) = read_pair(run, reference)?;
            json!({ "m1_error": relative(&a1, &b1)?, "m2_error": relative(&a2, &b2)? })
        }
    };
    run.write_json("report.json", &report)?;
    to_value(&cfg)
}
