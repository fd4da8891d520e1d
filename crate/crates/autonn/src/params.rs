//! Parameter storage and the parameter file format.
//!
//! A parameter file is an OMT1 container: magic `OMT1`, version `u32`,
//! dtype code 2 (container), a `u64` byte length followed by a JSON header
//! (architecture description and init seed), a `u32` tensor count, then
//! each tensor as a complete OMT1 record.

use std::fs;
use std::io::Read;
use std::path::Path;

use orbit_core::omt::{self, OmtTensor};
use orbit_core::RTensor;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{NnError, Result};
use crate::tape::{Tape, Var};

pub const DTYPE_CONTAINER: u32 = 2;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Params {
    pub tensors: Vec<RTensor>,
    pub names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamHeader {
    pub arch: Value,
    pub init_seed: u64,
    pub names: Vec<String>,
}

impl Params {
    pub fn push(&mut self, name: impl Into<String>, t: RTensor) -> usize {
        self.tensors.push(t);
        self.names.push(name.into());
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn lens(&self) -> Vec<usize> {
        self.tensors.iter().map(|t| t.len()).collect()
    }

    /// Put every parameter on `tape`.
    pub fn vars(&self, tape: &mut Tape) -> Vec<Var> {
        self.vars_from(tape, 0)
    }

    /// Put every parameter on `tape`, numbering them from `offset` so that
    /// several parameter sets can share one tape.
    pub fn vars_from(&self, tape: &mut Tape, offset: usize) -> Vec<Var> {
        self.tensors.iter().enumerate().map(|(i, t)| tape.param(offset + i, t)).collect()
    }

    pub fn check_finite(&self) -> Result<()> {
        for (t, name) in self.tensors.iter().zip(&self.names) {
            if t.check_finite().is_err() {
                return Err(NnError::NonFinite(format!("parameter {name}")));
            }
        }
        Ok(())
    }
}

pub fn encode_params(params: &Params, arch: &Value, init_seed: u64) -> Result<Vec<u8>> {
    let header = ParamHeader { arch: arch.clone(), init_seed, names: params.names.clone() };
    let json = serde_json::to_vec(&header)?;
    let mut buf = Vec::new();
    buf.extend_from_slice(omt::MAGIC);
    buf.extend_from_slice(&omt::VERSION.to_le_bytes());
    buf.extend_from_slice(&DTYPE_CONTAINER.to_le_bytes());
    buf.extend_from_slice(&(json.len() as u64).to_le_bytes());
    buf.extend_from_slice(&json);
    buf.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for t in &params.tensors {
        omt::encode(&OmtTensor::Real(t.clone()), &mut buf)?;
    }
    Ok(buf)
}

pub fn save_params(path: &Path, params: &Params, arch: &Value, init_seed: u64) -> Result<()> {
    fs::write(path, encode_params(params, arch, init_seed)?)?;
    Ok(())
}

/// Decode a parameter file into its header and tensors.
pub fn decode_params(bytes: &[u8]) -> Result<(ParamHeader, Params)> {
    let mut r = bytes;
    let mut word = [0u8; 4];
    r.read_exact(&mut word)?;
    if &word != omt::MAGIC {
        return Err(NnError::Format("bad magic".into()));
    }
    r.read_exact(&mut word)?;
    if u32::from_le_bytes(word) != omt::VERSION {
        return Err(NnError::Format(format!("unsupported version {}", u32::from_le_bytes(word))));
    }
    r.read_exact(&mut word)?;
    if u32::from_le_bytes(word) != DTYPE_CONTAINER {
        return Err(NnError::Format("not a parameter container".into()));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > r.len() {
        return Err(NnError::Format("truncated header".into()));
    }
    let header: ParamHeader = serde_json::from_slice(&r[..len])?;
    r = &r[len..];
    r.read_exact(&mut word)?;
    let count = u32::from_le_bytes(word) as usize;
    if count != header.names.len() {
        return Err(NnError::Format(format!("{} tensors but {} names", count, header.names.len())));
    }
    let mut params = Params::default();
    for name in &header.names {
        let t = omt::decode(&mut r)?.into_real()?;
        params.push(name.clone(), t);
    }
    Ok((header, params))
}

/// Load a parameter file and check it against the expected layout.
pub fn load_params(path: &Path, expected: &Params) -> Result<(ParamHeader, Params)> {
    let (header, params) = decode_params(&fs::read(path)?)?;
    if params.len() != expected.len() {
        return Err(NnError::Shape(format!("file has {} tensors, architecture needs {}", params.len(), expected.len())));
    }
    for (i, (a, b)) in params.tensors.iter().zip(&expected.tensors).enumerate() {
        if a.shape() != b.shape() {
            return Err(NnError::Shape(format!(
                "tensor {} ({}) has shape {:?}, architecture needs {:?}",
                i,
                expected.names[i],
                a.shape(),
                b.shape()
            )));
        }
    }
    params.check_finite()?;
    Ok((header, params))
}
