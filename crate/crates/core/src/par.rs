//! Data-parallel helpers. With the `parallel` feature these fan out over the
//! rayon pool; without it they run sequentially with identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

pub fn map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
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

pub fn map_range<R, F>(n: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync + Send,
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

/// Runs `f(k, segment_k)` over the segments of `data` delimited by `offsets`
/// (`offsets.len() == segments + 1`).
pub fn for_each_segment_mut<T, F>(data: &mut [T], offsets: &[usize], f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync + Send,
{
    let mut segments = Vec::with_capacity(offsets.len().saturating_sub(1));
    let mut rest = data;
    for w in offsets.windows(2) {
        let (head, tail) = rest.split_at_mut(w[1] - w[0]);
        segments.push(head);
        rest = tail;
    }
    #[cfg(feature = "parallel")]
    {
        segments
            .into_par_iter()
            .enumerate()
            .for_each(|(k, seg)| f(k, seg));
    }
    #[cfg(not(feature = "parallel"))]
    {
        segments
            .into_iter()
            .enumerate()
            .for_each(|(k, seg)| f(k, seg));
    }
}

/// Caps the global worker pool. A no-op for sequential builds.
pub fn set_threads(threads: usize) {
    #[cfg(feature = "parallel")]
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
    }
}

pub const fn is_parallel() -> bool {
    cfg!(feature = "parallel")
}
