//! Per-run context: output directory, seed, workers, and the record of
//! every file read and written, which becomes the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use orbit_core::omt::{self, OmtTensor};
use orbit_core::{CTensor, RTensor, Workers};
use orbit_cryo::{read_mrc, MrcMap};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const MANIFEST: &str = "manifest.json";
pub const DIAGNOSTIC: &str = "diagnostic.json";

/// Content hash in the style of git object ids: SHA-256 over
/// `"blob <len>\0"` followed by the bytes.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", bytes.len()).as_bytes());
    h.update(bytes);
    hex::encode(h.finalize())
}

pub fn hash_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(content_hash(&bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub workers: usize,
    /// The config as run, with defaults and seeds filled in.
    pub config: Value,
    /// Input files as given on the command line or in the config.
    pub inputs: Vec<FileHash>,
    /// Output files relative to the output directory.
    pub outputs: Vec<FileHash>,
}

pub struct Run {
    pub command: String,
    pub out: PathBuf,
    pub seed: u64,
    pub workers: Workers,
    inputs: Vec<PathBuf>,
    outputs: Vec<String>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl Run {
    pub fn new(command: &str, out: PathBuf, seed: u64, workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(CliError::Schema("worker count must be at least 1".into()));
        }
        fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
        Ok(Self { command: command.into(), out, seed, workers: Workers::new(workers), inputs: Vec::new(), outputs: Vec::new() })
    }

    fn note_input(&mut self, path: &Path) {
        if !self.inputs.iter().any(|p| p == path) {
            self.inputs.push(path.to_path_buf());
        }
    }

    fn note_output(&mut self, name: &str) {
        if !self.outputs.iter().any(|p| p == name) {
            self.outputs.push(name.into());
        }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn read_omt(&mut self, path: &Path) -> Result<OmtTensor> {
        self.note_input(path);
        omt::read(path).map_err(|e| io_err(path, e))
    }

    pub fn read_real(&mut self, path: &Path) -> Result<RTensor> {
        self.read_omt(path)?.into_real().map_err(|e| io_err(path, e))
    }

    pub fn read_complex(&mut self, path: &Path) -> Result<CTensor> {
        Ok(self.read_omt(path)?.into_complex())
    }

    /// The OMT1 sidecar of an input, `Null` when absent.
    pub fn read_meta(&mut self, path: &Path) -> Result<Value> {
        let side = omt::sidecar_path(path);
        if side.exists() {
            self.note_input(&side);
        }
        omt::read_meta(path).map_err(|e| io_err(path, e))
    }

    pub fn read_mrc(&mut self, path: &Path) -> Result<MrcMap> {
        self.note_input(path);
        read_mrc(path).map_err(|e| io_err(path, e))
    }

    /// A volume from an `.mrc` file or an `[n, n, n]` OMT1 tensor; the
    /// voxel size is `None` for OMT1.
    pub fn read_volume(&mut self, path: &Path) -> Result<(RTensor, Option<f64>)> {
        let is_mrc = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("mrc") || e.eq_ignore_ascii_case("map"));
        if is_mrc {
            let m = self.read_mrc(path)?;
            Ok((m.data, Some(m.voxel)))
        } else {
            let t = self.read_real(path)?;
            let meta = self.read_meta(path)?;
            Ok((t, meta.get("voxel").and_then(Value::as_f64)))
        }
    }

    pub fn read_bytes(&mut self, path: &Path) -> Result<Vec<u8>> {
        self.note_input(path);
        fs::read(path).map_err(|e| io_err(path, e))
    }

    pub fn write_omt(&mut self, name: &str, t: OmtTensor, meta: Option<Value>) -> Result<()> {
        let p = self.path(name);
        omt::write(&p, &t, meta.as_ref()).map_err(|e| io_err(&p, e))?;
        self.note_output(name);
        if meta.is_some() {
            self.note_output(&format!("{name}.json"));
        }
        Ok(())
    }

    pub fn write_real(&mut self, name: &str, t: &RTensor, meta: Option<Value>) -> Result<()> {
        self.write_omt(name, OmtTensor::Real(t.clone()), meta)
    }

    pub fn write_complex(&mut self, name: &str, t: &CTensor, meta: Option<Value>) -> Result<()> {
        self.write_omt(name, OmtTensor::Complex(t.clone()), meta)
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let p = self.path(name);
        fs::write(&p, bytes).map_err(|e| io_err(&p, e))?;
        self.note_output(name);
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, v: &impl Serialize) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(v)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    pub fn write_csv<T: Serialize>(&mut self, name: &str, rows: impl IntoIterator<Item = T>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in rows {
            w.serialize(r)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    /// Hash every recorded file and write the manifest.
    pub fn finish(mut self, config: Value) -> Result<Manifest> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| Ok(FileHash { path: p.display().to_string(), sha256: hash_file(p)? }))
            .collect::<Result<Vec<_>>>()?;
        let outputs = self
            .outputs
            .iter()
            .map(|name| Ok(FileHash { path: name.clone(), sha256: hash_file(&self.path(name))? }))
            .collect::<Result<Vec<_>>>()?;
        let manifest = Manifest {
            tool: "orbit".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.clone(),
            seed: self.seed,
            workers: self.workers.count(),
            config,
            inputs,
            outputs,
        };
        self.outputs.clear();
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        let p = self.path(MANIFEST);
        fs::write(&p, bytes).map_err(|e| io_err(&p, e))?;
        Ok(manifest)
    }
}
