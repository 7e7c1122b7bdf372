//! Execution strategy for the data-parallel stages.
//!
//! Per-client training, per-record scoring, and fraction sweeps are all
//! independent computations over a slice, so they funnel through [`par_map`].
//! With the `parallel` feature (the default) it fans out over rayon while
//! preserving input order, which keeps results byte-identical to the
//! sequential build; without the feature it degrades to a plain `map`.
//! [`seq_map`] is always sequential and exists so benchmarks can compare the
//! two on the same binary.

/// Order-preserving map, parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Order-preserving map, parallel when the `parallel` feature is on.
#[cfg(not(feature = "parallel"))]
pub fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    items.iter().map(f).collect()
}

/// Always-sequential twin of [`par_map`].
pub fn seq_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(&T) -> R,
{
    items.iter().map(f).collect()
}

/// Runs `f` under a bounded worker pool.
///
/// `jobs = None` uses the default pool; `Some(n)` caps it at `n` workers.
/// Without the `parallel` feature the bound is trivially satisfied by the
/// single-threaded fallback.
#[cfg(feature = "parallel")]
pub fn with_jobs<R: Send>(jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match jobs {
        None => f(),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n.max(1))
                .build()
                .expect("worker pool construction cannot fail for positive sizes");
            pool.install(f)
        }
    }
}

/// Runs `f` under a bounded worker pool.
#[cfg(not(feature = "parallel"))]
pub fn with_jobs<R: Send>(_jobs: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    f()
}
