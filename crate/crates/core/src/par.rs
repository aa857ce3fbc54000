//! Switch between the rayon-backed and the sequential code paths.
//!
//! Without the `parallel` feature every variant runs sequentially. Results never
//! depend on the choice; only wall time does.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Parallelism {
    Sequential,
    /// Use the ambient rayon pool (the CLI installs one sized by `--threads`).
    #[default]
    Rayon,
}

impl Parallelism {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Parallelism::Rayon
    }
}

/// Maps `f` over `items`, in parallel when allowed. Output order follows input order.
pub fn map_collect<T, R, F>(par: Parallelism, items: Vec<T>, f: F) -> Vec<R>
where
    T: Send,
    R: Send,
    F: Fn(T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        use rayon::prelude::*;
        return items.into_par_iter().map(f).collect();
    }
    let _ = par;
    items.into_iter().map(f).collect()
}

/// Runs `f` over disjoint mutable chunks of `data`, passing the chunk index.
pub fn for_each_chunk_mut<T, F>(par: Parallelism, data: &mut [T], chunk: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if par.is_parallel() {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = par;
    for (i, c) in data.chunks_mut(chunk).enumerate() {
        f(i, c);
    }
}
