//! Layer vocabulary and sequential chains.

use std::sync::Arc;

use orbit_core::RTensor;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{NnError, Result};
use crate::params::Params;
use crate::tape::{ConvTable, Tape, Var};

/// Negative-side slope of the leaky ReLU used throughout.
pub const LRELU_SLOPE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    /// Periodic 1D convolution over `[batch, n, channels]`.
    Conv1dPeriodic { window: usize, channels: usize },
    /// 2D convolution over `[batch, h, w, channels]`; periodic when
    /// `stride == 1`, otherwise valid windows only.
    Conv2d { window: usize, channels: usize, stride: usize },
    /// Dense layer on the flattened per-sample features.
    FullyConnected { width: usize },
    Lrelu,
    Tanh,
    Linear,
}

impl LayerSpec {
    pub fn conv1d(window: usize, channels: usize) -> Self {
        LayerSpec::Conv1dPeriodic { window, channels }
    }

    pub fn conv2d(window: usize, channels: usize) -> Self {
        LayerSpec::Conv2d { window, channels, stride: 1 }
    }

    pub fn full(width: usize) -> Self {
        LayerSpec::FullyConnected { width }
    }
}

#[derive(Debug, Clone)]
enum Compiled {
    Conv { w: usize, b: usize, table: Arc<ConvTable>, out_spatial: Vec<usize> },
    Full { w: usize, b: usize },
    Lrelu,
    Tanh,
    Linear,
}

/// A sequence of layers with fixed per-sample input shape.
#[derive(Debug, Clone)]
pub struct Chain {
    pub name: String,
    pub input: Vec<usize>,
    pub specs: Vec<LayerSpec>,
    pub output: Vec<usize>,
    compiled: Vec<Compiled>,
}

/// Xavier-uniform initialization bound.
fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

fn uniform_tensor(rng: &mut impl Rng, shape: Vec<usize>, bound: f64) -> RTensor {
    let len = shape.iter().product();
    let data = (0..len).map(|_| rng.random_range(-bound..=bound)).collect();
    RTensor::new(shape, data).expect("shape product")
}

impl Chain {
    /// Check shapes and allocate initialized parameters into `params`.
    /// `input` is the per-sample shape (spatial extents then channels).
    pub fn build(name: &str, input: &[usize], specs: &[LayerSpec], params: &mut Params, rng: &mut impl Rng) -> Result<Self> {
        let mut shape = input.to_vec();
        let mut compiled = Vec::with_capacity(specs.len());
        for (li, spec) in specs.iter().enumerate() {
            let tag = format!("{name}.{li}");
            match *spec {
                LayerSpec::Conv1dPeriodic { window, channels } => {
                    if window % 2 == 0 || channels == 0 || shape.len() != 2 {
                        return Err(NnError::Arch(format!("{tag}: conv1d window {window}, channels {channels} on {:?}", shape)));
                    }
                    let (n, cin) = (shape[0], shape[1]);
                    let table = Arc::new(ConvTable::periodic_1d(n, window));
                    let bound = glorot(window * cin, window * channels);
                    let w = params.push(format!("{tag}.w"), uniform_tensor(rng, vec![window * cin, channels], bound));
                    let b = params.push(format!("{tag}.b"), RTensor::zeros(vec![channels]));
                    compiled.push(Compiled::Conv { w, b, table, out_spatial: vec![n] });
                    shape = vec![n, channels];
                }
                LayerSpec::Conv2d { window, channels, stride } => {
                    if window % 2 == 0 || channels == 0 || shape.len() != 3 {
                        return Err(NnError::Arch(format!("{tag}: conv2d window {window}, channels {channels} on {:?}", shape)));
                    }
                    let (h, wd, cin) = (shape[0], shape[1], shape[2]);
                    let table = ConvTable::grid_2d(h, wd, window, stride)?;
                    let (oh, ow) = if stride == 1 { (h, wd) } else { ((h - window) / stride + 1, (wd - window) / stride + 1) };
                    let taps = window * window;
                    let bound = glorot(taps * cin, taps * channels);
                    let w = params.push(format!("{tag}.w"), uniform_tensor(rng, vec![taps * cin, channels], bound));
                    let b = params.push(format!("{tag}.b"), RTensor::zeros(vec![channels]));
                    compiled.push(Compiled::Conv { w, b, table: Arc::new(table), out_spatial: vec![oh, ow] });
                    shape = vec![oh, ow, channels];
                }
                LayerSpec::FullyConnected { width } => {
                    if width == 0 {
                        return Err(NnError::Arch(format!("{tag}: zero width")));
                    }
                    let fin: usize = shape.iter().product();
                    let w = params.push(format!("{tag}.w"), uniform_tensor(rng, vec![fin, width], glorot(fin, width)));
                    let b = params.push(format!("{tag}.b"), RTensor::zeros(vec![width]));
                    compiled.push(Compiled::Full { w, b });
                    shape = vec![width];
                }
                LayerSpec::Lrelu => compiled.push(Compiled::Lrelu),
                LayerSpec::Tanh => compiled.push(Compiled::Tanh),
                LayerSpec::Linear => compiled.push(Compiled::Linear),
            }
        }
        Ok(Self { name: name.to_string(), input: input.to_vec(), specs: specs.to_vec(), output: shape, compiled })
    }

    /// Apply the chain to `x [batch, input..]`.
    pub fn forward(&self, tape: &mut Tape, vars: &[Var], x: Var) -> Result<Var> {
        let xs = tape.shape(x).to_vec();
        if xs.len() != self.input.len() + 1 || xs[1..] != self.input[..] {
            return Err(NnError::Shape(format!("{}: expected [batch, {:?}], got {:?}", self.name, self.input, xs)));
        }
        let batch = xs[0];
        let mut h = x;
        for c in &self.compiled {
            h = match c {
                Compiled::Conv { w, b, table, out_spatial } => tape.conv(h, vars[*w], vars[*b], table.clone(), out_spatial)?,
                Compiled::Full { w, b } => {
                    let s = tape.shape(h).to_vec();
                    let flat = if s.len() == 2 { h } else { tape.reshape(h, &[batch, s[1..].iter().product()])? };
                    tape.dense(flat, vars[*w], vars[*b])?
                }
                Compiled::Lrelu => tape.lrelu(h, LRELU_SLOPE),
                Compiled::Tanh => tape.tanh(h),
                Compiled::Linear => h,
            };
        }
        Ok(h)
    }

    /// Indices of the parameters owned by this chain, in creation order.
    pub fn param_indices(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for c in &self.compiled {
            match c {
                Compiled::Conv { w, b, .. } | Compiled::Full { w, b } => out.extend([*w, *b]),
                _ => {}
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> rand::rngs::StdRng {
        rand::rngs::StdRng::seed_from_u64(5)
    }

    #[test]
    fn identity_dense_passes_input_through() {
        let mut params = Params::default();
        let chain = Chain::build("fc", &[3], &[LayerSpec::full(3), LayerSpec::Linear], &mut params, &mut rng()).unwrap();
        params.tensors[0] = RTensor::new(vec![3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
        let mut tape = Tape::new();
        let vars = params.vars(&mut tape);
        let x = tape.constant(RTensor::new(vec![1, 3], vec![0.5, -1.0, 2.0]).unwrap());
        let y = chain.forward(&mut tape, &vars, x).unwrap();
        assert_eq!(tape.value(y), &[0.5, -1.0, 2.0]);
    }

    #[test]
    fn lrelu_slope() {
        let mut tape = Tape::new();
        let x = tape.constant(RTensor::from_vec(vec![-1.0, 2.0]));
        let y = tape.lrelu(x, LRELU_SLOPE);
        assert_eq!(tape.value(y), &[-0.02, 2.0]);
    }

    #[test]
    fn delta_kernel_is_identity() {
        let mut params = Params::default();
        let chain = Chain::build("c", &[5, 1], &[LayerSpec::conv1d(3, 1)], &mut params, &mut rng()).unwrap();
        params.tensors[0] = RTensor::new(vec![3, 1], vec![0.0, 1.0, 0.0]).unwrap();
        let mut tape = Tape::new();
        let vars = params.vars(&mut tape);
        let input = vec![1.0, -2.0, 3.0, 0.5, 4.0];
        let x = tape.constant(RTensor::new(vec![1, 5, 1], input.clone()).unwrap());
        let y = chain.forward(&mut tape, &vars, x).unwrap();
        assert_eq!(tape.value(y), input.as_slice());
    }

    #[test]
    fn strided_conv2d_shape() {
        let mut params = Params::default();
        let specs = [LayerSpec::Conv2d { window: 3, channels: 4, stride: 3 }, LayerSpec::conv2d(3, 2)];
        let chain = Chain::build("s", &[9, 9, 2], &specs, &mut params, &mut rng()).unwrap();
        assert_eq!(chain.output, vec![3, 3, 2]);
    }

    #[test]
    fn even_window_rejected() {
        let mut params = Params::default();
        assert!(Chain::build("e", &[5, 1], &[LayerSpec::conv1d(4, 1)], &mut params, &mut rng()).is_err());
    }
}
