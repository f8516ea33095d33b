//! Execution mode switch: data-parallel kernels with a sequential fallback.
//!
//! Every parallel code path in this crate is *order-deterministic*: work is
//! split into fixed chunks, per-chunk results are collected in chunk order and
//! combined sequentially, so the same inputs produce bit-identical outputs
//! whether run on one thread or many. The one exception is asynchronous SGNS
//! training (see `embedding::train_sgns`), which trades determinism for speed
//! when `Execution::Parallel` is selected.
//!
//! With the `parallel` feature disabled the crate compiles without rayon and
//! `Execution::Parallel` silently degrades to the sequential path.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    /// Strict single-threaded execution; fully deterministic.
    Sequential,
    /// Use the global rayon pool (when the `parallel` feature is enabled).
    Parallel,
}

impl Execution {
    /// Map a `--threads N` style setting: 1 means sequential.
    pub fn from_threads(threads: usize) -> Self {
        if threads == 1 {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Map `f` over `0..n`, preserving index order in the output.
pub fn map_indexed<U, F>(exec: Execution, n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = exec;
    (0..n).map(f).collect()
}

/// Map `f` over a slice, preserving element order in the output.
pub fn map_slice<T, U, F>(exec: Execution, items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}

/// Deterministic parallel accumulation: `f` fills a fresh `width`-sized f64
/// buffer for each fixed chunk of `0..n`; chunk results are summed in chunk
/// order, so the floating-point reduction order never depends on thread count.
pub fn chunked_accumulate<F>(exec: Execution, n: usize, width: usize, chunk: usize, f: F) -> Vec<f64>
where
    F: Fn(std::ops::Range<usize>, &mut [f64]) + Sync + Send,
{
    let chunk = chunk.max(1);
    let ranges: Vec<_> = (0..n)
        .step_by(chunk)
        .map(|start| start..(start + chunk).min(n))
        .collect();
    let partials = map_slice(exec, &ranges, |r| {
        let mut acc = vec![0.0; width];
        f(r.clone(), &mut acc);
        acc
    });
    let mut total = vec![0.0; width];
    for part in &partials {
        for (t, p) in total.iter_mut().zip(part) {
            *t += p;
        }
    }
    total
}

/// SplitMix64 step; used to derive independent per-task RNG seeds.
pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a seed from a base seed and a sequence of stream identifiers.
/// Deterministic and well-mixed, so sibling streams are independent.
pub(crate) fn derive_seed(base: u64, stream: &[u64]) -> u64 {
    let mut h = splitmix64(base);
    for &s in stream {
        h = splitmix64(h ^ splitmix64(s));
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chunked_accumulate_matches_sequential_sum() {
        let n = 1000;
        let acc = chunked_accumulate(Execution::Sequential, n, 3, 64, |range, acc| {
            for i in range {
                acc[0] += i as f64;
                acc[1] += 1.0;
                acc[2] += (i % 7) as f64;
            }
        });
        assert_eq!(acc[0], (n * (n - 1) / 2) as f64);
        assert_eq!(acc[1], n as f64);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn parallel_accumulation_is_bit_identical_to_sequential() {
        // Awkward magnitudes make FP addition order visible.
        let f = |range: std::ops::Range<usize>, acc: &mut [f64]| {
            for i in range {
                acc[0] += 1.0 / (1.0 + i as f64).sqrt() * 1e10_f64.powf((i % 5) as f64 / 5.0);
            }
        };
        let seq = chunked_accumulate(Execution::Sequential, 10_000, 1, 128, f);
        let par = chunked_accumulate(Execution::Parallel, 10_000, 1, 128, f);
        assert_eq!(seq[0].to_bits(), par[0].to_bits());
    }

    #[test]
    fn derived_seeds_differ_across_streams() {
        let a = derive_seed(42, &[0, 1]);
        let b = derive_seed(42, &[1, 0]);
        let c = derive_seed(42, &[0, 1]);
        assert_ne!(a, b);
        assert_eq!(a, c);
    }
}
