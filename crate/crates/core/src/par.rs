//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature these dispatch to rayon; without it they run
//! on the calling thread. Callers must not depend on evaluation order: every
//! closure receives its item index and derives any randomness from it.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `0..n`, preserving index order in the output.
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

/// Maps `f` over a slice with the element index, preserving order.
pub fn map_indexed<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(usize, &S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        items.par_iter().enumerate().map(|(i, s)| f(i, s)).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().enumerate().map(|(i, s)| f(i, s)).collect()
    }
}

/// Folds `0..n` into per-chunk accumulators and merges them.
///
/// Chunks are fixed-size so the result does not depend on the thread count
/// as long as `merge` is associative and commutative on the accumulator.
pub fn fold_chunks<A, F, M>(n: usize, chunk: usize, init: impl Fn() -> A + Sync + Send, f: F, merge: M) -> A
where
    A: Send,
    F: Fn(&mut A, usize) + Sync + Send,
    M: Fn(A, A) -> A + Sync + Send,
{
    let chunk = chunk.max(1);
    let n_chunks = n.div_ceil(chunk);
    let run = |c: usize| {
        let mut acc = init();
        for i in c * chunk..((c + 1) * chunk).min(n) {
            f(&mut acc, i);
        }
        acc
    };
    #[cfg(feature = "parallel")]
    {
        let parts: Vec<A> = (0..n_chunks).into_par_iter().map(run).collect();
        parts.into_iter().fold(init(), &merge)
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_chunks).map(run).fold(init(), &merge)
    }
}
