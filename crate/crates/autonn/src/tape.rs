//! Reverse-mode differentiation over dense real tensors.
//!
//! Every op evaluates eagerly and appends a node to the [`Tape`]; gradients
//! flow back through [`Tape::backward`]. Complex quantities are carried as a
//! trailing axis of length 2 holding (re, im).

use std::sync::Arc;

use orbit_core::RTensor;

use crate::error::{NnError, Result};
use crate::linalg::{gemm, Mat};

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Source table for a convolution: output position `p`, tap `t` reads input
/// position `src[p * taps + t]` (or nothing when `None`).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvTable {
    pub in_positions: usize,
    pub out_positions: usize,
    pub taps: usize,
    pub src: Vec<Option<u32>>,
}

impl ConvTable {
    /// Periodic 1D cross-correlation with an odd window.
    pub fn periodic_1d(n: usize, window: usize) -> Self {
        let h = window / 2;
        let mut src = Vec::with_capacity(n * window);
        for i in 0..n {
            for t in 0..window {
                src.push(Some(((i + n * window + t - h) % n) as u32));
            }
        }
        Self { in_positions: n, out_positions: n, taps: window, src }
    }

    /// 2D cross-correlation on an `h x w` grid. Stride 1 wraps periodically
    /// and keeps the grid size; larger strides use only full windows.
    pub fn grid_2d(h: usize, w: usize, window: usize, stride: usize) -> Result<Self> {
        if stride == 0 || window == 0 {
            return Err(NnError::Arch("conv2d needs window and stride >= 1".into()));
        }
        let mut src = Vec::new();
        let (oh, ow);
        if stride == 1 {
            let c = window / 2;
            oh = h;
            ow = w;
            for y in 0..h {
                for x in 0..w {
                    for ty in 0..window {
                        for tx in 0..window {
                            let sy = (y + h * window + ty - c) % h;
                            let sx = (x + w * window + tx - c) % w;
                            src.push(Some((sy * w + sx) as u32));
                        }
                    }
                }
            }
        } else {
            if h < window || w < window {
                return Err(NnError::Arch(format!("conv2d window {window} larger than {h}x{w} input")));
            }
            oh = (h - window) / stride + 1;
            ow = (w - window) / stride + 1;
            for y in 0..oh {
                for x in 0..ow {
                    for ty in 0..window {
                        for tx in 0..window {
                            src.push(Some(((y * stride + ty) * w + x * stride + tx) as u32));
                        }
                    }
                }
            }
        }
        Ok(Self { in_positions: h * w, out_positions: oh * ow, taps: window * window, src })
    }
}

/// Sparse linear map in CSR form: `out[i] = sum_k coef[k] * x[idx[k]]` for
/// `k` in `offsets[i]..offsets[i + 1]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Sparse {
    pub offsets: Vec<usize>,
    pub idx: Vec<usize>,
    pub coef: Vec<f64>,
    pub in_len: usize,
}

impl Sparse {
    pub fn new(in_len: usize) -> Self {
        Self { offsets: vec![0], idx: Vec::new(), coef: Vec::new(), in_len }
    }

    pub fn push_row(&mut self, terms: &[(usize, f64)]) {
        for &(i, c) in terms {
            self.idx.push(i);
            self.coef.push(c);
        }
        self.offsets.push(self.idx.len());
    }

    pub fn out_len(&self) -> usize {
        self.offsets.len() - 1
    }

    /// A plain gather: `out[i] = x[src[i]]`.
    pub fn gather(src: &[usize], in_len: usize) -> Self {
        let mut s = Self::new(in_len);
        for &i in src {
            s.push_row(&[(i, 1.0)]);
        }
        s
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out_len())
            .map(|i| (self.offsets[i]..self.offsets[i + 1]).map(|k| self.coef[k] * x[self.idx[k]]).sum())
            .collect()
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Param(usize),
    Dense { x: usize, w: usize, b: usize, rows: usize, fin: usize, fout: usize },
    Conv { x: usize, w: usize, b: usize, table: Arc<ConvTable>, batch: usize, cin: usize, cout: usize, cols: Vec<f64> },
    LRelu { x: usize, slope: f64 },
    Tanh(usize),
    Exp(usize),
    Sin(usize),
    Cos(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Scale(usize, f64),
    Concat { parts: Vec<usize>, widths: Vec<usize> },
    Reshape(usize),
    Sparse { x: usize, map: Arc<Sparse> },
    Softmax { x: usize, width: usize },
    Simplex { x: usize, width: usize },
    Mse(usize, usize),
    FrobDist { a: usize, b: usize },
    Sum(usize),
    ComplexMul(usize, usize),
    WeightedSum { z: usize, s: usize, j: usize, d: usize },
    WeightedOuter { z: usize, s: usize, j: usize, d: usize },
}

#[derive(Debug, Clone)]
struct Node {
    value: Vec<f64>,
    shape: Vec<usize>,
    op: Op,
    grad: bool,
}

/// Smoothing added under the square root of [`Tape::frob_dist`].
pub const FROB_EPS: f64 = 1e-12;

#[derive(Debug, Default, Clone)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar with respect to every node that required them.
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Vec<f64>>>,
    params: Vec<(usize, usize)>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&[f64]> {
        self.grads[v.0].as_deref()
    }

    /// Gradient for each parameter (given by flat length), zero-filled where a
    /// parameter did not influence the loss.
    pub fn params(&self, shapes: &[usize]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = shapes.iter().map(|&len| vec![0.0; len]).collect();
        for &(node, p) in &self.params {
            if let (Some(g), Some(slot)) = (&self.grads[node], out.get_mut(p)) {
                slot.iter_mut().zip(g).for_each(|(a, b)| *a += b);
            }
        }
        out
    }
}

fn shape_err<T>(msg: String) -> Result<T> {
    Err(NnError::Shape(msg))
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Vec<f64>, shape: Vec<usize>, op: Op, grad: bool) -> Var {
        debug_assert_eq!(value.len(), shape.iter().product::<usize>());
        self.nodes.push(Node { value, shape, op, grad });
        Var(self.nodes.len() - 1)
    }

    fn any_grad(&self, ids: &[usize]) -> bool {
        ids.iter().any(|&i| self.nodes[i].grad)
    }

    pub fn value(&self, v: Var) -> &[f64] {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        &self.nodes[v.0].shape
    }

    pub fn tensor(&self, v: Var) -> RTensor {
        let n = &self.nodes[v.0];
        RTensor::new(n.shape.clone(), n.value.clone()).expect("node shape consistent")
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.nodes[v.0].value[0]
    }

    /// A value that gradients do not flow into.
    pub fn constant(&mut self, t: RTensor) -> Var {
        let shape = t.shape().to_vec();
        self.push(t.into_data(), shape, Op::Leaf, false)
    }

    /// A value that gradients are tracked for.
    pub fn leaf(&mut self, t: RTensor) -> Var {
        let shape = t.shape().to_vec();
        self.push(t.into_data(), shape, Op::Leaf, true)
    }

    /// Register parameter number `index` with its current value.
    pub fn param(&mut self, index: usize, t: &RTensor) -> Var {
        self.push(t.data().to_vec(), t.shape().to_vec(), Op::Param(index), true)
    }

    /// Dense layer on the last axis: `x [.., fin] * w [fin, fout] + b [fout]`.
    pub fn dense(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if ws.len() != 2 || xs.last() != Some(&ws[0]) || self.shape(b) != [ws[1]] {
            return shape_err(format!("dense: x {:?}, w {:?}, b {:?}", xs, ws, self.shape(b)));
        }
        let (fin, fout) = (ws[0], ws[1]);
        let rows = self.nodes[x.0].value.len() / fin.max(1);
        let mut out = Vec::with_capacity(rows * fout);
        for _ in 0..rows {
            out.extend_from_slice(&self.nodes[b.0].value);
        }
        gemm(
            1.0,
            &self.nodes[x.0].value,
            Mat::rowmajor(rows, fin),
            &self.nodes[w.0].value,
            Mat::rowmajor(fin, fout),
            1.0,
            &mut out,
            Mat::rowmajor(rows, fout),
        );
        let mut shape = xs;
        *shape.last_mut().expect("rank >= 1") = fout;
        let grad = self.any_grad(&[x.0, w.0, b.0]);
        Ok(self.push(out, shape, Op::Dense { x: x.0, w: w.0, b: b.0, rows, fin, fout }, grad))
    }

    /// Convolution described by `table` over `x [batch, positions.., cin]`
    /// with `w [taps * cin, cout]` and `b [cout]`. `out_shape` lists the
    /// output spatial extents.
    pub fn conv(&mut self, x: Var, w: Var, b: Var, table: Arc<ConvTable>, out_spatial: &[usize]) -> Result<Var> {
        let xs = self.shape(x).to_vec();
        let ws = self.shape(w).to_vec();
        if xs.len() < 2 || ws.len() != 2 {
            return shape_err(format!("conv: x {:?}, w {:?}", xs, ws));
        }
        let batch = xs[0];
        let cin = *xs.last().expect("rank >= 2");
        let positions: usize = xs[1..xs.len() - 1].iter().product();
        let cout = ws[1];
        if positions != table.in_positions
            || ws[0] != table.taps * cin
            || self.shape(b) != [cout]
            || out_spatial.iter().product::<usize>() != table.out_positions
        {
            return shape_err(format!(
                "conv: x {:?}, w {:?}, b {:?} incompatible with {} taps over {} positions",
                xs,
                ws,
                self.shape(b),
                table.taps,
                table.in_positions
            ));
        }
        let (p_out, taps) = (table.out_positions, table.taps);
        let kdim = taps * cin;
        let xv = &self.nodes[x.0].value;
        let mut cols = vec![0.0; batch * p_out * kdim];
        for bi in 0..batch {
            let xb = &xv[bi * positions * cin..(bi + 1) * positions * cin];
            for p in 0..p_out {
                let row = &mut cols[(bi * p_out + p) * kdim..(bi * p_out + p + 1) * kdim];
                for t in 0..taps {
                    if let Some(s) = table.src[p * taps + t] {
                        let s = s as usize;
                        row[t * cin..(t + 1) * cin].copy_from_slice(&xb[s * cin..(s + 1) * cin]);
                    }
                }
            }
        }
        let rows = batch * p_out;
        let mut out = Vec::with_capacity(rows * cout);
        for _ in 0..rows {
            out.extend_from_slice(&self.nodes[b.0].value);
        }
        gemm(1.0, &cols, Mat::rowmajor(rows, kdim), &self.nodes[w.0].value, Mat::rowmajor(kdim, cout), 1.0, &mut out, Mat::rowmajor(rows, cout));
        let mut shape = vec![batch];
        shape.extend_from_slice(out_spatial);
        shape.push(cout);
        let grad = self.any_grad(&[x.0, w.0, b.0]);
        // the unfolded input is only needed to form the weight gradient
        let cols = if self.nodes[w.0].grad { cols } else { Vec::new() };
        Ok(self.push(out, shape, Op::Conv { x: x.0, w: w.0, b: b.0, table, batch, cin, cout, cols }, grad))
    }

    fn unary(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let value = self.nodes[x.0].value.iter().map(|&v| f(v)).collect();
        let shape = self.nodes[x.0].shape.clone();
        let grad = self.nodes[x.0].grad;
        self.push(value, shape, op, grad)
    }

    pub fn lrelu(&mut self, x: Var, slope: f64) -> Var {
        self.unary(x, |v| if v > 0.0 { v } else { slope * v }, Op::LRelu { x: x.0, slope })
    }

    pub fn tanh(&mut self, x: Var) -> Var {
        self.unary(x, f64::tanh, Op::Tanh(x.0))
    }

    pub fn exp(&mut self, x: Var) -> Var {
        self.unary(x, f64::exp, Op::Exp(x.0))
    }

    pub fn sin(&mut self, x: Var) -> Var {
        self.unary(x, f64::sin, Op::Sin(x.0))
    }

    pub fn cos(&mut self, x: Var) -> Var {
        self.unary(x, f64::cos, Op::Cos(x.0))
    }

    pub fn scale(&mut self, x: Var, s: f64) -> Var {
        self.unary(x, |v| s * v, Op::Scale(x.0, s))
    }

    fn binary(&mut self, a: Var, b: Var, name: &str, f: impl Fn(f64, f64) -> f64, op: Op) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return shape_err(format!("{name}: {:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        let value = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(&x, &y)| f(x, y)).collect();
        let shape = self.nodes[a.0].shape.clone();
        let grad = self.any_grad(&[a.0, b.0]);
        Ok(self.push(value, shape, op, grad))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "add", |x, y| x + y, Op::Add(a.0, b.0))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "sub", |x, y| x - y, Op::Sub(a.0, b.0))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(a, b, "mul", |x, y| x * y, Op::Mul(a.0, b.0))
    }

    /// Concatenate along the last axis; leading axes must agree.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts.first().ok_or_else(|| NnError::Shape("concat of nothing".into()))?;
        let lead = self.shape(*first)[..self.shape(*first).len() - 1].to_vec();
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let s = self.shape(p);
            if s.is_empty() || s[..s.len() - 1] != lead[..] {
                return shape_err(format!("concat: {:?} vs leading {:?}", s, lead));
            }
            widths.push(*s.last().expect("rank >= 1"));
        }
        let rows: usize = lead.iter().product();
        let total: usize = widths.iter().sum();
        let mut out = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                out.extend_from_slice(&self.nodes[p.0].value[r * w..(r + 1) * w]);
            }
        }
        let mut shape = lead;
        shape.push(total);
        let ids: Vec<usize> = parts.iter().map(|p| p.0).collect();
        let grad = self.any_grad(&ids);
        Ok(self.push(out, shape, Op::Concat { parts: ids, widths }, grad))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        if shape.iter().product::<usize>() != self.nodes[x.0].value.len() {
            return shape_err(format!("reshape {:?} to {:?}", self.shape(x), shape));
        }
        let value = self.nodes[x.0].value.clone();
        let grad = self.nodes[x.0].grad;
        Ok(self.push(value, shape.to_vec(), Op::Reshape(x.0), grad))
    }

    pub fn sparse(&mut self, x: Var, map: Arc<Sparse>, shape: &[usize]) -> Result<Var> {
        if map.in_len != self.nodes[x.0].value.len() || shape.iter().product::<usize>() != map.out_len() {
            return shape_err(format!(
                "sparse map {} -> {} applied to {:?} with output {:?}",
                map.in_len,
                map.out_len(),
                self.shape(x),
                shape
            ));
        }
        let value = map.apply(&self.nodes[x.0].value);
        let grad = self.nodes[x.0].grad;
        Ok(self.push(value, shape.to_vec(), Op::Sparse { x: x.0, map }, grad))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Var {
        let width = *self.shape(x).last().unwrap_or(&1);
        let mut value = self.nodes[x.0].value.clone();
        for row in value.chunks_mut(width.max(1)) {
            let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.iter_mut().for_each(|v| *v = (*v - m).exp());
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= s);
        }
        let shape = self.nodes[x.0].shape.clone();
        let grad = self.nodes[x.0].grad;
        self.push(value, shape, Op::Softmax { x: x.0, width }, grad)
    }

    /// Clip negatives to zero and renormalize each last-axis row to sum 1.
    /// A row with no positive entry maps to the uniform distribution.
    pub fn simplex_project(&mut self, x: Var) -> Var {
        let width = *self.shape(x).last().unwrap_or(&1);
        let mut value = self.nodes[x.0].value.clone();
        for row in value.chunks_mut(width.max(1)) {
            row.iter_mut().for_each(|v| *v = v.max(0.0));
            let s: f64 = row.iter().sum();
            if s > 0.0 {
                row.iter_mut().for_each(|v| *v /= s);
            } else {
                row.iter_mut().for_each(|v| *v = 1.0 / width as f64);
            }
        }
        let shape = self.nodes[x.0].shape.clone();
        let grad = self.nodes[x.0].grad;
        self.push(value, shape, Op::Simplex { x: x.0, width }, grad)
    }

    /// Mean of squared differences.
    pub fn mse(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return shape_err(format!("mse: {:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        let n = self.nodes[a.0].value.len().max(1) as f64;
        let s: f64 = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(x, y)| (x - y) * (x - y)).sum();
        let grad = self.any_grad(&[a.0, b.0]);
        Ok(self.push(vec![s / n], vec![], Op::Mse(a.0, b.0), grad))
    }

    /// Smoothed Frobenius distance `sqrt(|a - b|^2 + FROB_EPS)`.
    pub fn frob_dist(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) {
            return shape_err(format!("frob_dist: {:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        let s: f64 = self.nodes[a.0].value.iter().zip(&self.nodes[b.0].value).map(|(x, y)| (x - y) * (x - y)).sum();
        let grad = self.any_grad(&[a.0, b.0]);
        Ok(self.push(vec![(s + FROB_EPS).sqrt()], vec![], Op::FrobDist { a: a.0, b: b.0 }, grad))
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.nodes[x.0].value.iter().sum();
        let grad = self.nodes[x.0].grad;
        self.push(vec![s], vec![], Op::Sum(x.0), grad)
    }

    /// Element-wise complex product of two `[.., 2]` tensors.
    pub fn complex_mul(&mut self, a: Var, b: Var) -> Result<Var> {
        if self.shape(a) != self.shape(b) || self.shape(a).last() != Some(&2) {
            return shape_err(format!("complex_mul: {:?} vs {:?}", self.shape(a), self.shape(b)));
        }
        let (av, bv) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        let mut value = vec![0.0; av.len()];
        for i in (0..av.len()).step_by(2) {
            value[i] = av[i] * bv[i] - av[i + 1] * bv[i + 1];
            value[i + 1] = av[i] * bv[i + 1] + av[i + 1] * bv[i];
        }
        let shape = self.nodes[a.0].shape.clone();
        let grad = self.any_grad(&[a.0, b.0]);
        Ok(self.push(value, shape, Op::ComplexMul(a.0, b.0), grad))
    }

    fn check_weighted(&self, z: Var, s: Var, name: &str) -> Result<(usize, usize)> {
        let ss = self.shape(s);
        if ss.len() != 3 || ss[2] != 2 || self.shape(z) != [ss[0]] {
            return shape_err(format!("{name}: weights {:?}, values {:?}", self.shape(z), ss));
        }
        Ok((ss[0], ss[1]))
    }

    /// `sum_j z[j] s[j]` for weights `z [J]` and complex rows `s [J, D, 2]`.
    pub fn weighted_sum(&mut self, z: Var, s: Var) -> Result<Var> {
        let (j, d) = self.check_weighted(z, s, "weighted_sum")?;
        let mut out = vec![0.0; 2 * d];
        gemm(1.0, &self.nodes[z.0].value, Mat::rowmajor(1, j), &self.nodes[s.0].value, Mat::rowmajor(j, 2 * d), 0.0, &mut out, Mat::rowmajor(1, 2 * d));
        let grad = self.any_grad(&[z.0, s.0]);
        Ok(self.push(out, vec![d, 2], Op::WeightedSum { z: z.0, s: s.0, j, d }, grad))
    }

    /// `sum_j z[j] s[j] s[j]^*` as a `[D, D, 2]` tensor.
    pub fn weighted_outer(&mut self, z: Var, s: Var) -> Result<Var> {
        let (j, d) = self.check_weighted(z, s, "weighted_outer")?;
        let sv = &self.nodes[s.0].value;
        let zv = &self.nodes[z.0].value;
        let zs: Vec<f64> = sv.iter().enumerate().map(|(i, v)| v * zv[i / (2 * d)]).collect();
        let mut out = vec![0.0; 2 * d * d];
        let part = Mat::strided(j, d, 2 * d, 2);
        let part_t = Mat::strided(d, j, 2, 2 * d);
        let out_re = Mat::strided(d, d, 2 * d, 2);
        // real part: Ar^T Z Ar + Ai^T Z Ai
        gemm(1.0, sv, part_t, &zs, part, 0.0, &mut out, out_re);
        gemm(1.0, &sv[1..], part_t, &zs[1..], part, 1.0, &mut out, out_re);
        // imaginary part: Ai^T Z Ar - Ar^T Z Ai
        gemm(1.0, &sv[1..], part_t, &zs, part, 0.0, &mut out[1..], out_re);
        gemm(-1.0, sv, part_t, &zs[1..], part, 1.0, &mut out[1..], out_re);
        let grad = self.any_grad(&[z.0, s.0]);
        Ok(self.push(out, vec![d, d, 2], Op::WeightedOuter { z: z.0, s: s.0, j, d }, grad))
    }

    /// Reverse sweep from the scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let ln = &self.nodes[loss.0];
        if ln.value.len() != 1 {
            return Err(NnError::NotScalar(ln.value.len()));
        }
        let mut grads: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        grads[loss.0] = Some(vec![1.0]);
        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            if !node.grad {
                continue;
            }
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        let params = (0..=loss.0)
            .filter_map(|i| match self.nodes[i].op {
                Op::Param(p) => Some((i, p)),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads, params })
    }

    fn acc<'a>(&self, grads: &'a mut [Option<Vec<f64>>], id: usize) -> Option<&'a mut Vec<f64>> {
        if !self.nodes[id].grad {
            return None;
        }
        let len = self.nodes[id].value.len();
        Some(grads[id].get_or_insert_with(|| vec![0.0; len]))
    }

    fn propagate(&self, id: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let node = &self.nodes[id];
        let val = |i: usize| -> &[f64] { &self.nodes[i].value };
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            &Op::Dense { x, w, b, rows, fin, fout } => {
                if let Some(gx) = self.acc(grads, x) {
                    gemm(1.0, g, Mat::rowmajor(rows, fout), val(w), Mat::transposed(fout, fin), 1.0, gx, Mat::rowmajor(rows, fin));
                }
                if let Some(gw) = self.acc(grads, w) {
                    gemm(1.0, val(x), Mat::transposed(fin, rows), g, Mat::rowmajor(rows, fout), 1.0, gw, Mat::rowmajor(fin, fout));
                }
                if let Some(gb) = self.acc(grads, b) {
                    for r in g.chunks(fout) {
                        gb.iter_mut().zip(r).for_each(|(a, b)| *a += b);
                    }
                }
            }
            Op::Conv { x, w, b, table, batch, cin, cout, cols } => {
                let (x, w, b, batch, cin, cout) = (*x, *w, *b, *batch, *cin, *cout);
                let rows = batch * table.out_positions;
                let kdim = table.taps * cin;
                if let Some(gw) = self.acc(grads, w) {
                    gemm(1.0, cols, Mat::transposed(kdim, rows), g, Mat::rowmajor(rows, cout), 1.0, gw, Mat::rowmajor(kdim, cout));
                }
                if let Some(gb) = self.acc(grads, b) {
                    for r in g.chunks(cout) {
                        gb.iter_mut().zip(r).for_each(|(a, b)| *a += b);
                    }
                }
                if self.nodes[x].grad {
                    let mut gcols = vec![0.0; rows * kdim];
                    gemm(1.0, g, Mat::rowmajor(rows, cout), val(w), Mat::transposed(cout, kdim), 0.0, &mut gcols, Mat::rowmajor(rows, kdim));
                    let gx = self.acc(grads, x).expect("x requires grad");
                    let positions = table.in_positions;
                    for bi in 0..batch {
                        let gxb = &mut gx[bi * positions * cin..(bi + 1) * positions * cin];
                        for p in 0..table.out_positions {
                            let row = &gcols[(bi * table.out_positions + p) * kdim..][..kdim];
                            for t in 0..table.taps {
                                if let Some(s) = table.src[p * table.taps + t] {
                                    let s = s as usize;
                                    gxb[s * cin..(s + 1) * cin]
                                        .iter_mut()
                                        .zip(&row[t * cin..(t + 1) * cin])
                                        .for_each(|(a, b)| *a += b);
                                }
                            }
                        }
                    }
                }
            }
            &Op::LRelu { x, slope } => {
                let xv = val(x);
                if let Some(gx) = self.acc(grads, x) {
                    for i in 0..g.len() {
                        gx[i] += if xv[i] > 0.0 { g[i] } else { slope * g[i] };
                    }
                }
            }
            &Op::Tanh(x) => {
                let y = &node.value;
                if let Some(gx) = self.acc(grads, x) {
                    for i in 0..g.len() {
                        gx[i] += g[i] * (1.0 - y[i] * y[i]);
                    }
                }
            }
            &Op::Exp(x) => {
                let y = &node.value;
                if let Some(gx) = self.acc(grads, x) {
                    for i in 0..g.len() {
                        gx[i] += g[i] * y[i];
                    }
                }
            }
            &Op::Sin(x) => {
                let xv = val(x);
                if let Some(gx) = self.acc(grads, x) {
                    for i in 0..g.len() {
                        gx[i] += g[i] * xv[i].cos();
                    }
                }
            }
            &Op::Cos(x) => {
                let xv = val(x);
                if let Some(gx) = self.acc(grads, x) {
                    for i in 0..g.len() {
                        gx[i] -= g[i] * xv[i].sin();
                    }
                }
            }
            &Op::Scale(x, s) => {
                if let Some(gx) = self.acc(grads, x) {
                    gx.iter_mut().zip(g).for_each(|(a, b)| *a += s * b);
                }
            }
            &Op::Add(a, b) | &Op::Sub(a, b) => {
                let sign = if matches!(node.op, Op::Sub(..)) { -1.0 } else { 1.0 };
                if let Some(ga) = self.acc(grads, a) {
                    ga.iter_mut().zip(g).for_each(|(x, y)| *x += y);
                }
                if let Some(gb) = self.acc(grads, b) {
                    gb.iter_mut().zip(g).for_each(|(x, y)| *x += sign * y);
                }
            }
            &Op::Mul(a, b) => {
                let (av, bv) = (val(a), val(b));
                if let Some(ga) = self.acc(grads, a) {
                    for i in 0..g.len() {
                        ga[i] += g[i] * bv[i];
                    }
                }
                if let Some(gb) = self.acc(grads, b) {
                    for i in 0..g.len() {
                        gb[i] += g[i] * av[i];
                    }
                }
            }
            Op::Concat { parts, widths } => {
                let total: usize = widths.iter().sum();
                let rows = g.len() / total.max(1);
                let mut off = 0;
                for (&p, &w) in parts.iter().zip(widths) {
                    if let Some(gp) = self.acc(grads, p) {
                        for r in 0..rows {
                            gp[r * w..(r + 1) * w].iter_mut().zip(&g[r * total + off..r * total + off + w]).for_each(|(a, b)| *a += b);
                        }
                    }
                    off += w;
                }
            }
            &Op::Reshape(x) => {
                if let Some(gx) = self.acc(grads, x) {
                    gx.iter_mut().zip(g).for_each(|(a, b)| *a += b);
                }
            }
            Op::Sparse { x, map } => {
                if let Some(gx) = self.acc(grads, *x) {
                    for i in 0..map.out_len() {
                        for k in map.offsets[i]..map.offsets[i + 1] {
                            gx[map.idx[k]] += map.coef[k] * g[i];
                        }
                    }
                }
            }
            &Op::Softmax { x, width } => {
                let y = &node.value;
                if let Some(gx) = self.acc(grads, x) {
                    for (r, (yr, gr)) in y.chunks(width).zip(g.chunks(width)).enumerate() {
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for i in 0..width {
                            gx[r * width + i] += yr[i] * (gr[i] - dot);
                        }
                    }
                }
            }
            &Op::Simplex { x, width } => {
                let xv = val(x);
                let y = &node.value;
                if let Some(gx) = self.acc(grads, x) {
                    for r in 0..xv.len() / width {
                        let xr = &xv[r * width..(r + 1) * width];
                        let s: f64 = xr.iter().map(|v| v.max(0.0)).sum();
                        if s <= 0.0 {
                            continue;
                        }
                        let yr = &y[r * width..(r + 1) * width];
                        let gr = &g[r * width..(r + 1) * width];
                        let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                        for i in 0..width {
                            if xr[i] > 0.0 {
                                gx[r * width + i] += (gr[i] - dot) / s;
                            }
                        }
                    }
                }
            }
            &Op::Mse(a, b) => {
                let (av, bv) = (val(a), val(b));
                let c = 2.0 * g[0] / av.len().max(1) as f64;
                if let Some(ga) = self.acc(grads, a) {
                    for i in 0..av.len() {
                        ga[i] += c * (av[i] - bv[i]);
                    }
                }
                if let Some(gb) = self.acc(grads, b) {
                    for i in 0..av.len() {
                        gb[i] -= c * (av[i] - bv[i]);
                    }
                }
            }
            &Op::FrobDist { a, b } => {
                let (av, bv) = (val(a), val(b));
                let c = g[0] / node.value[0];
                if let Some(ga) = self.acc(grads, a) {
                    for i in 0..av.len() {
                        ga[i] += c * (av[i] - bv[i]);
                    }
                }
                if let Some(gb) = self.acc(grads, b) {
                    for i in 0..av.len() {
                        gb[i] -= c * (av[i] - bv[i]);
                    }
                }
            }
            &Op::Sum(x) => {
                if let Some(gx) = self.acc(grads, x) {
                    gx.iter_mut().for_each(|v| *v += g[0]);
                }
            }
            &Op::ComplexMul(a, b) => {
                let (av, bv) = (val(a), val(b));
                // d/da of Re<g, a b> with conj(b): g * conj(b)
                if let Some(ga) = self.acc(grads, a) {
                    for i in (0..g.len()).step_by(2) {
                        ga[i] += g[i] * bv[i] + g[i + 1] * bv[i + 1];
                        ga[i + 1] += -g[i] * bv[i + 1] + g[i + 1] * bv[i];
                    }
                }
                if let Some(gb) = self.acc(grads, b) {
                    for i in (0..g.len()).step_by(2) {
                        gb[i] += g[i] * av[i] + g[i + 1] * av[i + 1];
                        gb[i + 1] += -g[i] * av[i + 1] + g[i + 1] * av[i];
                    }
                }
            }
            &Op::WeightedSum { z, s, j, d } => {
                if let Some(gz) = self.acc(grads, z) {
                    gemm(1.0, val(s), Mat::rowmajor(j, 2 * d), g, Mat::rowmajor(2 * d, 1), 1.0, gz, Mat::rowmajor(j, 1));
                }
                let zv = val(z);
                if let Some(gs) = self.acc(grads, s) {
                    for (jj, row) in gs.chunks_mut(2 * d).enumerate() {
                        row.iter_mut().zip(g).for_each(|(a, b)| *a += zv[jj] * b);
                    }
                }
            }
            &Op::WeightedOuter { z, s, j, d } => self.weighted_outer_backward(z, s, j, d, g, grads),
        }
    }

    fn weighted_outer_backward(&self, z: usize, s: usize, j: usize, d: usize, g: &[f64], grads: &mut [Option<Vec<f64>>]) {
        let sv = &self.nodes[s].value;
        let zv = &self.nodes[z].value;
        // gsym = Gr + Gr^T, gskew = Gi - Gi^T
        let mut gsym = vec![0.0; d * d];
        let mut gskew = vec![0.0; d * d];
        for a in 0..d {
            for b in 0..d {
                gsym[a * d + b] = g[2 * (a * d + b)] + g[2 * (b * d + a)];
                gskew[a * d + b] = g[2 * (a * d + b) + 1] - g[2 * (b * d + a) + 1];
            }
        }
        let part = Mat::strided(j, d, 2 * d, 2);
        let sq = Mat::rowmajor(d, d);
        if self.nodes[s].grad {
            // dAr = Z [Ar gsym + Ai gskew], dAi = Z [Ai gsym - Ar gskew]
            let mut t = vec![0.0; 2 * j * d];
            gemm(1.0, sv, part, &gsym, sq, 0.0, &mut t, part);
            gemm(1.0, &sv[1..], part, &gskew, sq, 1.0, &mut t, part);
            gemm(1.0, &sv[1..], part, &gsym, sq, 0.0, &mut t[1..], part);
            gemm(-1.0, sv, part, &gskew, sq, 1.0, &mut t[1..], part);
            let gs = self.acc(grads, s).expect("s requires grad");
            for (i, v) in t.iter().enumerate() {
                gs[i] += zv[i / (2 * d)] * v;
            }
        }
        if self.nodes[z].grad {
            // dz_j = Ar_j Gr Ar_j^T + Ai_j Gr Ai_j^T + Ai_j Gi Ar_j^T - Ar_j Gi Ai_j^T
            let gr: Vec<f64> = g.iter().step_by(2).cloned().collect();
            let gi: Vec<f64> = g.iter().skip(1).step_by(2).cloned().collect();
            let mut t = vec![0.0; 2 * j * d];
            gemm(1.0, sv, part, &gr, sq, 0.0, &mut t, part);
            gemm(1.0, &sv[1..], part, &gi, sq, 1.0, &mut t, part);
            gemm(1.0, &sv[1..], part, &gr, sq, 0.0, &mut t[1..], part);
            gemm(-1.0, sv, part, &gi, sq, 1.0, &mut t[1..], part);
            // row j of (Ar Gr + Ai Gi) dotted with Ar_j, (Ai Gr - Ar Gi) with Ai_j
            let gz = self.acc(grads, z).expect("z requires grad");
            for jj in 0..j {
                let row = &t[jj * 2 * d..(jj + 1) * 2 * d];
                let srow = &sv[jj * 2 * d..(jj + 1) * 2 * d];
                gz[jj] += row.iter().zip(srow).map(|(a, b)| a * b).sum::<f64>();
            }
        }
    }
}
