//! Worker pools with order-preserving results.

use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Workers {
    count: usize,
}

impl Default for Workers {
    fn default() -> Self {
        Self::new(1)
    }
}

impl Workers {
    /// A count of 0 means "use all available cores".
    pub fn new(count: usize) -> Self {
        let count = if count == 0 { std::thread::available_parallelism().map(|c| c.get()).unwrap_or(1) } else { count };
        Self { count }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Evaluate `f(0..len)` and return the results in index order.
    pub fn map<T, F>(&self, len: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        if self.count <= 1 || len <= 1 {
            return (0..len).map(f).collect();
        }
        match rayon::ThreadPoolBuilder::new().num_threads(self.count).build() {
            Ok(pool) => pool.install(|| (0..len).into_par_iter().map(&f).collect()),
            Err(_) => (0..len).map(f).collect(),
        }
    }
}
