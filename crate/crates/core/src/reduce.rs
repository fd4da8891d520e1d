//! Deterministic summation.
//!
//! Summands are grouped into consecutive blocks of [`BLOCK`] elements, each
//! block is summed left to right, and block partials are merged pairwise in
//! a binary-counter tree. The result depends only on the ordered sequence of
//! summands, never on how they were chunked or on how many workers computed
//! the block partials.

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::par::Workers;
use crate::tensor::CTensor;

pub const BLOCK: usize = 1024;

/// Pairwise merge tree over block partials, fed in order.
#[derive(Debug, Clone, Default)]
pub struct PairwiseTree<T> {
    // stack[i] holds a partial covering 2^levels[i] blocks
    stack: Vec<(u32, T)>,
}

/// Values that can be summed element-wise in place.
pub trait Summable: Clone {
    fn add_assign(&mut self, other: &Self);
}

impl Summable for Vec<f64> {
    fn add_assign(&mut self, other: &Self) {
        self.iter_mut().zip(other).for_each(|(a, b)| *a += b);
    }
}

impl Summable for Vec<Complex64> {
    fn add_assign(&mut self, other: &Self) {
        self.iter_mut().zip(other).for_each(|(a, b)| *a += b);
    }
}

impl<A: Summable, B: Summable> Summable for (A, B) {
    fn add_assign(&mut self, other: &Self) {
        self.0.add_assign(&other.0);
        self.1.add_assign(&other.1);
    }
}

impl<T: Summable> PairwiseTree<T> {
    pub fn new() -> Self {
        Self { stack: Vec::new() }
    }

    /// Push the partial of the next block in sequence.
    pub fn push(&mut self, partial: T) {
        let mut cur = (0u32, partial);
        while let Some((level, _)) = self.stack.last() {
            if *level != cur.0 {
                break;
            }
            let (level, mut left) = self.stack.pop().expect("non-empty");
            left.add_assign(&cur.1);
            cur = (level + 1, left);
        }
        self.stack.push(cur);
    }

    /// Fold the remaining partials right to left; `None` if nothing was pushed.
    pub fn finish(mut self) -> Option<T> {
        let mut acc = self.stack.pop()?.1;
        while let Some((_, mut left)) = self.stack.pop() {
            left.add_assign(&acc);
            acc = left;
        }
        Some(acc)
    }
}

/// Sum `f(0), f(1), ..., f(chunks - 1)` through a [`PairwiseTree`],
/// evaluating a bounded wave of chunks in parallel at a time. Each `f(i)`
/// must itself be deterministic; the combination order is fixed.
pub fn chunked_sum<T, F>(chunks: usize, workers: &Workers, f: F) -> Option<T>
where
    T: Summable + Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let wave = (workers.count() * 4).max(1);
    let mut tree = PairwiseTree::new();
    let mut start = 0;
    while start < chunks {
        let len = wave.min(chunks - start);
        for partial in workers.map(len, |i| f(start + i)) {
            tree.push(partial);
        }
        start += len;
    }
    tree.finish()
}

/// Sum a sequence of equally shaped tensors.
pub fn reduce_sum(chunks: &[CTensor]) -> Result<CTensor> {
    reduce_sum_with(chunks, &Workers::new(1))
}

pub fn reduce_sum_with(chunks: &[CTensor], workers: &Workers) -> Result<CTensor> {
    let first = chunks
        .first()
        .ok_or_else(|| CoreError::Invalid("reduce_sum needs at least one summand".into()))?;
    let shape = first.shape().to_vec();
    if let Some(bad) = chunks.iter().find(|c| c.shape() != shape.as_slice()) {
        return Err(CoreError::Shape(format!("summand shape {:?} differs from {:?}", bad.shape(), shape)));
    }
    let blocks: Vec<&[CTensor]> = chunks.chunks(BLOCK).collect();
    let partials = workers.map(blocks.len(), |b| {
        let mut acc = blocks[b][0].data().to_vec();
        for t in &blocks[b][1..] {
            acc.iter_mut().zip(t.data()).for_each(|(a, b)| *a += b);
        }
        acc
    });
    let mut tree = PairwiseTree::new();
    for p in partials {
        tree.push(p);
    }
    CTensor::new(shape, tree.finish().expect("at least one block"))
}
