//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature these run on the current rayon pool; without it
//! they are plain loops. Results are always in input order, so output does not
//! depend on thread count.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Maps `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(usize, &T) -> R + Sync + Send,
{
    map_ordered_sequential(items, f)
}

/// Always-sequential variant of [`map_ordered`], kept for benchmarking.
pub fn map_ordered_sequential<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    F: Fn(usize, &T) -> R,
{
    items.iter().enumerate().map(|(i, t)| f(i, t)).collect()
}

/// Best `(index, value)` of `f` over `0..n`, skipping `None`. Ties go to the
/// lowest index, so the result is independent of how work is split.
#[cfg(feature = "parallel")]
pub fn argmax<F>(n: usize, f: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> Option<f64> + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .with_min_len(4096)
        .filter_map(|i| f(i).map(|v| (i, v)))
        .reduce_with(pick_best)
}

#[cfg(not(feature = "parallel"))]
pub fn argmax<F>(n: usize, f: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> Option<f64> + Sync + Send,
{
    (0..n).filter_map(|i| f(i).map(|v| (i, v))).reduce(pick_best)
}

fn pick_best(a: (usize, f64), b: (usize, f64)) -> (usize, f64) {
    if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
        b
    } else {
        a
    }
}
