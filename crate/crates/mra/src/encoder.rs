//! The moment encoder: two convolutional branches (one on `m1`, one on the
//! rows of `m2`) stacked to six channels, a merged convolutional stage, and
//! a fully connected head producing either the density or the signal.

use orbit_core::{RTensor, SeededRng};
use orbit_nn::{Chain, LayerSpec, Params, Tape, Var};
use serde::{Deserialize, Serialize};

use crate::error::{MraError, Result};
use crate::moments::MomentPair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Real density values on the shift grid (`n` outputs).
    Rho,
    /// Complex Fourier coefficients of the signal (`2n` outputs).
    V,
}

impl Head {
    pub fn width(self, n: usize) -> usize {
        match self {
            Head::Rho => n,
            Head::V => 2 * n,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderArch {
    pub branch_m1: Vec<LayerSpec>,
    pub branch_m2: Vec<LayerSpec>,
    pub merged: Vec<LayerSpec>,
    /// Hidden part of the head; the final `full(width)` layer is appended.
    pub head: Vec<LayerSpec>,
}

impl EncoderArch {
    pub fn default_for(n: usize) -> Self {
        use LayerSpec::Lrelu;
        let c = LayerSpec::conv1d;
        Self {
            branch_m1: vec![c(5, 8), Lrelu, c(5, 8), Lrelu, c(5, 3), Lrelu],
            branch_m2: vec![c(5, 32), Lrelu, c(5, 16), Lrelu, c(5, 3), Lrelu],
            merged: vec![c(5, 8), Lrelu, c(5, 8), Lrelu],
            head: vec![LayerSpec::full(2 * n), Lrelu],
        }
    }
}

/// Scale applied to `m1` before it enters the network.
pub fn m1_scale(n: usize) -> f64 {
    1.0 / (n as f64).sqrt()
}

/// Scale applied to `m2` before it enters the network.
pub fn m2_scale(n: usize) -> f64 {
    1.0 / n as f64
}

/// Multiplier from raw network output to natural units.
pub fn output_scale(n: usize, head: Head) -> f64 {
    match head {
        Head::Rho => 1.0 / n as f64,
        Head::V => (n as f64).sqrt(),
    }
}

#[derive(Debug, Clone)]
pub struct Encoder {
    pub n: usize,
    pub head: Head,
    pub arch: EncoderArch,
    pub init_seed: u64,
    pub params: Params,
    m1: Chain,
    m2: Chain,
    merged: Chain,
    out: Chain,
}

impl Encoder {
    /// Number of scalar parameters.
    pub fn size(&self) -> usize {
        self.params.count()
    }

    /// Architecture header stored with saved parameters.
    pub fn header(&self) -> serde_json::Value {
        serde_json::json!({ "model": "mra_encoder", "n": self.n, "head": self.head, "arch": self.arch })
    }

    /// Output of the convolutional stages, `[batch, n, channels]`.
    pub fn features(&self, tape: &mut Tape, vars: &[Var], m1: Var, m2: Var) -> Result<Var> {
        let a = self.m1.forward(tape, vars, m1)?;
        let b = self.m2.forward(tape, vars, m2)?;
        let stacked = tape.concat(&[a, b])?;
        Ok(self.merged.forward(tape, vars, stacked)?)
    }

    /// Raw network output `[batch, width]` (before the unit scaling).
    pub fn forward_raw(&self, tape: &mut Tape, vars: &[Var], m1: Var, m2: Var) -> Result<Var> {
        let merged = self.features(tape, vars, m1, m2)?;
        Ok(self.out.forward(tape, vars, merged)?)
    }

    /// Output in natural units: density values, or interleaved (re, im)
    /// Fourier coefficients.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], m1: Var, m2: Var) -> Result<Var> {
        let raw = self.forward_raw(tape, vars, m1, m2)?;
        Ok(tape.scale(raw, output_scale(self.n, self.head)))
    }

    /// Evaluate on moment pairs without tracking gradients.
    pub fn predict(&self, pairs: &[&MomentPair]) -> Result<Vec<Vec<f64>>> {
        let (x1, x2) = encoder_inputs(pairs)?;
        let mut tape = Tape::new();
        let vars = self.params.vars(&mut tape);
        let a = tape.constant(x1);
        let b = tape.constant(x2);
        let y = self.forward(&mut tape, &vars, a, b)?;
        let w = self.head.width(self.n);
        Ok(tape.value(y).chunks(w).map(|c| c.to_vec()).collect())
    }
}

/// Build an encoder with Xavier-uniform weights drawn from `seed`.
pub fn build_encoder(n: usize, head: Head, arch: &EncoderArch, seed: u64) -> Result<Encoder> {
    if n < 3 {
        return Err(MraError::Invalid(format!("encoder needs n >= 3, got {n}")));
    }
    let mut params = Params::default();
    let mut rng = SeededRng::new(seed, head_label(head)).stream(0);
    let m1 = Chain::build("m1", &[n, 2], &arch.branch_m1, &mut params, &mut rng)?;
    let m2 = Chain::build("m2", &[n, 2 * n], &arch.branch_m2, &mut params, &mut rng)?;
    if m1.output != [n, 3] || m2.output != [n, 3] {
        return Err(MraError::Invalid(format!(
            "branches must each end with 3 channels on {n} points, got {:?} and {:?}",
            m1.output, m2.output
        )));
    }
    let merged = Chain::build("merged", &[n, 6], &arch.merged, &mut params, &mut rng)?;
    let mut head_specs = arch.head.clone();
    head_specs.push(LayerSpec::full(head.width(n)));
    let out = Chain::build("head", &merged.output, &head_specs, &mut params, &mut rng)?;
    Ok(Encoder { n, head, arch: arch.clone(), init_seed: seed, params, m1, m2, merged, out })
}

fn head_label(head: Head) -> &'static str {
    match head {
        Head::Rho => "encoder/rho",
        Head::V => "encoder/v",
    }
}

/// Network inputs `[batch, n, 2]` and `[batch, n, 2n]` (rows of `m2`).
pub fn encoder_inputs(pairs: &[&MomentPair]) -> Result<(RTensor, RTensor)> {
    let first = pairs.first().ok_or_else(|| MraError::Invalid("no moment pairs".into()))?;
    let n = first.n();
    let (s1, s2) = (m1_scale(n), m2_scale(n));
    let mut x1 = Vec::with_capacity(pairs.len() * 2 * n);
    let mut x2 = Vec::with_capacity(pairs.len() * 2 * n * n);
    for p in pairs {
        if p.n() != n || p.m2.len() != n * n {
            return Err(MraError::Shape("moment pairs in a batch must share n".into()));
        }
        for c in &p.m1 {
            x1.extend([c.re * s1, c.im * s1]);
        }
        for c in &p.m2 {
            x2.extend([c.re * s2, c.im * s2]);
        }
    }
    let b = pairs.len();
    Ok((RTensor::new(vec![b, n, 2], x1)?, RTensor::new(vec![b, n, 2 * n], x2)?))
}
