//! Data-parallel shims.
//!
//! With the `parallel` feature these dispatch onto rayon; without it they are
//! plain sequential loops. Both paths visit and collect in index order, so
//! results never depend on the thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Apply `f` to every `chunk`-sized piece of `data`.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(&mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(chunk).for_each(f);
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(chunk).for_each(f);
}

/// Evaluate `f(0..n)` and collect the results in index order.
pub fn map_range<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
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

/// Whether this build runs data-parallel loops on a thread pool.
pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
