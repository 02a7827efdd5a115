//! Data-parallel helpers.
//!
//! With the `parallel` feature (on by default) the batch loops in this crate
//! fan out over rayon's pool; without it they run sequentially. Results are
//! always collected in index order so reductions stay bitwise reproducible
//! regardless of thread count.

/// Evaluate `f(i)` for `i in 0..n` and collect in index order.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        map_indexed_seq(n, f)
    }
}

/// Sequential counterpart of [`map_indexed`], available in every build.
pub fn map_indexed_seq<T, F>(n: usize, f: F) -> Vec<T>
where
    F: Fn(usize) -> T,
{
    (0..n).map(f).collect()
}

/// Configure the global worker pool. A no-op in sequential builds.
pub fn set_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        if threads > 0 {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global()
            {
                log::warn!("thread pool already initialised: {e}");
            }
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
    }
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_preserved() {
        let v = map_indexed(1000, |i| i * 2);
        assert_eq!(v, map_indexed_seq(1000, |i| i * 2));
    }
}
