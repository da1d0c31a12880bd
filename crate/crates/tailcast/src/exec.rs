//! Thin indirection over rayon so every data-parallel loop in the crate has a
//! sequential twin. Built with the default `parallel` feature the helpers fan
//! out on the global rayon pool; built with `--no-default-features` they run
//! as plain iterators with identical results, since all callers are
//! order-preserving maps over independent inputs.

/// Map over a slice, preserving input order.
#[cfg(feature = "parallel")]
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Map over a slice, preserving input order.
#[cfg(not(feature = "parallel"))]
pub fn par_map<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Map over `0..n`, preserving index order.
#[cfg(feature = "parallel")]
pub fn par_map_idx<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Map over `0..n`, preserving index order.
#[cfg(not(feature = "parallel"))]
pub fn par_map_idx<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Configure the global worker pool. A no-op in sequential builds. Calling it
/// twice is harmless: rayon keeps the first configuration and we log the
/// rejection instead of failing the run.
pub fn configure_threads(jobs: usize) {
    #[cfg(feature = "parallel")]
    {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = jobs;
    }
}
