//! Data-parallel map over index ranges and slices, with a sequential fallback
//! when the `parallel` feature is disabled. Output order is always the input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Map `f` over `xs`, in parallel when the `parallel` feature is enabled.
pub fn map<T, U, F>(xs: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        xs.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        xs.iter().map(f).collect()
    }
}

/// Map `f` over `0..n`.
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Always-sequential map, kept for benchmarking against `map`.
pub fn map_seq<T, U, F>(xs: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    xs.iter().map(f).collect()
}

/// Whether this build runs scans in parallel.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
