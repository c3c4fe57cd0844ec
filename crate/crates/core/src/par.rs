//! Optional data parallelism.
//!
//! With the `parallel` feature the helpers here dispatch to rayon; without it
//! they fall back to sequential iterators. Every helper maps an index (or a
//! disjoint chunk) to an independent result and collects in index order, so
//! outputs never depend on scheduling.
//!
//! [`set_sequential`] forces the sequential path at runtime even when the
//! feature is on; the benches use it to compare the two paths in one binary.

use std::sync::atomic::{AtomicBool, Ordering};

static FORCE_SEQUENTIAL: AtomicBool = AtomicBool::new(false);

/// Forces (or releases) the sequential path for all helpers in this module.
pub fn set_sequential(on: bool) {
    FORCE_SEQUENTIAL.store(on, Ordering::Relaxed);
}

/// Whether the helpers will currently run on the rayon pool.
pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.load(Ordering::Relaxed)
}

/// Runs `f` with the sequential path forced, restoring the previous mode.
pub fn with_sequential<R>(f: impl FnOnce() -> R) -> R {
    let prev = FORCE_SEQUENTIAL.swap(true, Ordering::Relaxed);
    let out = f();
    FORCE_SEQUENTIAL.store(prev, Ordering::Relaxed);
    out
}

/// `(0..n).map(f).collect()`, possibly in parallel.
pub fn map_indices<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Maps over a slice, possibly in parallel, preserving order.
pub fn map_slice<S, T, F>(items: &[S], f: F) -> Vec<T>
where
    S: Sync,
    T: Send,
    F: Fn(&S) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    items.iter().map(f).collect()
}

/// Applies `f(chunk_index, chunk)` to consecutive `chunk_len`-sized pieces of
/// `data`. Below `min_len` elements the work stays on the calling thread.
pub fn for_each_chunk_mut<T, F>(data: &mut [T], chunk_len: usize, min_len: usize, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let chunk_len = chunk_len.max(1);
    #[cfg(feature = "parallel")]
    if is_parallel() && data.len() >= min_len {
        use rayon::prelude::*;
        data.par_chunks_mut(chunk_len)
            .enumerate()
            .for_each(|(i, c)| f(i, c));
        return;
    }
    let _ = min_len;
    data.chunks_mut(chunk_len)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequential_and_parallel_agree() {
        let par = map_indices(1000, |i| (i as f64).sqrt().sin());
        let seq = with_sequential(|| map_indices(1000, |i| (i as f64).sqrt().sin()));
        assert_eq!(par, seq);
    }

    #[test]
    fn chunks_cover_everything_once() {
        let mut v = vec![0usize; 103];
        for_each_chunk_mut(&mut v, 10, 0, |ci, c| {
            for (j, x) in c.iter_mut().enumerate() {
                *x = ci * 10 + j;
            }
        });
        assert_eq!(v, (0..103).collect::<Vec<_>>());
    }
}
