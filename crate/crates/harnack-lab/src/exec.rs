//! Batch execution helpers with a deterministic aggregation contract.
//!
//! Work is split into fixed index batches. Batches may run on any number of
//! threads (rayon when the `parallel` feature is on), but results are merged
//! sequentially in batch order, so the output is bit-identical regardless of
//! worker count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub const DEFAULT_BATCH: u64 = 1024;

/// Scalar accumulator with compensated summation and success/censor counters.
#[derive(Clone, Copy, Debug, Default)]
pub struct Accum {
    pub sum: f64,
    comp: f64,
    pub sum_sq: f64,
    comp_sq: f64,
    pub n: u64,
    pub hits: u64,
    pub censored: u64,
}

impl Accum {
    pub fn add(&mut self, x: f64) {
        let y = x - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
        let y2 = x * x - self.comp_sq;
        let t2 = self.sum_sq + y2;
        self.comp_sq = (t2 - self.sum_sq) - y2;
        self.sum_sq = t2;
        self.n += 1;
    }

    pub fn merge(&mut self, other: &Accum) {
        self.add_value_pair(other.sum, other.sum_sq);
        self.n += other.n;
        self.hits += other.hits;
        self.censored += other.censored;
    }

    fn add_value_pair(&mut self, s: f64, s2: f64) {
        let y = s - self.comp;
        let t = self.sum + y;
        self.comp = (t - self.sum) - y;
        self.sum = t;
        let y2 = s2 - self.comp_sq;
        let t2 = self.sum_sq + y2;
        self.comp_sq = (t2 - self.sum_sq) - y2;
        self.sum_sq = t2;
    }

    pub fn mean(&self) -> f64 {
        self.sum / self.n as f64
    }

    /// Standard error of the mean (sample standard deviation / sqrt(n)).
    pub fn stderr(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let n = self.n as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}

/// Runs `worker` for every index in `0..n`, accumulating per batch and
/// merging batch accumulators in index order.
pub fn accumulate_indexed<F>(n: u64, batch: u64, worker: F) -> Accum
where
    F: Fn(u64, &mut Accum) + Sync + Send,
{
    let partials = map_batches(n, batch, |range| {
        let mut acc = Accum::default();
        for i in range {
            worker(i, &mut acc);
        }
        acc
    });
    let mut total = Accum::default();
    for p in &partials {
        total.merge(p);
    }
    total
}

/// Maps fixed index batches to values, returned in batch order.
pub fn map_batches<T, F>(n: u64, batch: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<u64>) -> T + Sync + Send,
{
    let batch = batch.max(1);
    let n_batches = n.div_ceil(batch);
    let ranges = (0..n_batches).map(|b| (b * batch)..((b + 1) * batch).min(n));
    #[cfg(feature = "parallel")]
    {
        ranges.collect::<Vec<_>>().into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ranges.map(f).collect()
    }
}

/// Sequential reference path for the same batching contract; used by the
/// benchmark suite to compare against the parallel dispatch.
pub fn map_batches_seq<T, F>(n: u64, batch: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(std::ops::Range<u64>) -> T + Sync + Send,
{
    let batch = batch.max(1);
    let n_batches = n.div_ceil(batch);
    (0..n_batches)
        .map(|b| f((b * batch)..((b + 1) * batch).min(n)))
        .collect()
}

/// Maps `f` over items of a slice, in parallel when enabled.
pub fn map_items<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

/// Fills row `i` of a dense row-major matrix via `f(i, row)`.
pub fn fill_rows<F>(data: &mut [f64], n_cols: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        data.par_chunks_mut(n_cols)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }
    #[cfg(not(feature = "parallel"))]
    {
        data.chunks_mut(n_cols).enumerate().for_each(|(i, row)| f(i, row));
    }
}

/// Configures the global thread pool. A no-op without the `parallel` feature.
pub fn configure_threads(n: usize) -> crate::error::Result<()> {
    #[cfg(feature = "parallel")]
    {
        if n > 0 {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
                .map_err(|e| crate::error::Error::Config(format!("thread pool: {e}")))?;
        }
        Ok(())
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = n;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accum_mean_and_stderr() {
        let mut a = Accum::default();
        for x in [1.0, 2.0, 3.0, 4.0] {
            a.add(x);
        }
        assert_eq!(a.mean(), 2.5);
        // sample sd of {1,2,3,4} is sqrt(5/3); stderr = sd/2
        let expect = (5.0f64 / 3.0).sqrt() / 2.0;
        assert!((a.stderr() - expect).abs() < 1e-14);
    }

    #[test]
    fn batch_merge_is_order_stable() {
        let a = accumulate_indexed(10_000, 64, |i, acc| acc.add((i as f64).sin()));
        let b = accumulate_indexed(10_000, 64, |i, acc| acc.add((i as f64).sin()));
        assert_eq!(a.sum.to_bits(), b.sum.to_bits());
        assert_eq!(a.sum_sq.to_bits(), b.sum_sq.to_bits());
    }
}
