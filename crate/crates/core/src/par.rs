//! Data-parallel helpers. With the `parallel` feature the maps run on the
//! rayon pool; without it, or inside [`sequential`], they run in order on
//! the calling thread. Output order never depends on scheduling.

use std::cell::Cell;

thread_local! {
    static FORCE_SEQUENTIAL: Cell<bool> = const { Cell::new(false) };
}

/// Runs `f` with every helper in this module forced onto the current thread.
pub fn sequential<R>(f: impl FnOnce() -> R) -> R {
    let prev = FORCE_SEQUENTIAL.with(|c| c.replace(true));
    let out = f();
    FORCE_SEQUENTIAL.with(|c| c.set(prev));
    out
}

pub fn is_parallel() -> bool {
    cfg!(feature = "parallel") && !FORCE_SEQUENTIAL.with(|c| c.get())
}

#[cfg(feature = "parallel")]
pub fn map_range<R, F>(len: usize, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Send + Sync,
{
    use rayon::prelude::*;
    if is_parallel() {
        (0..len).into_par_iter().map(f).collect()
    } else {
        (0..len).map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_range<R, F>(len: usize, f: F) -> Vec<R>
where
    F: Fn(usize) -> R,
{
    (0..len).map(f).collect()
}

/// Index of the maximum `key(i)` over `0..len`, ties going to the smaller
/// index. `None` keys are skipped.
#[cfg(feature = "parallel")]
pub fn argmax_range<F>(len: usize, key: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> Option<f64> + Send + Sync,
{
    use rayon::prelude::*;
    if !is_parallel() {
        return argmax_seq(len, key);
    }
    (0..len)
        .into_par_iter()
        .filter_map(|i| key(i).map(|v| (i, v)))
        .reduce_with(better)
}

#[cfg(not(feature = "parallel"))]
pub fn argmax_range<F>(len: usize, key: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> Option<f64>,
{
    argmax_seq(len, key)
}

fn argmax_seq<F>(len: usize, key: F) -> Option<(usize, f64)>
where
    F: Fn(usize) -> Option<f64>,
{
    (0..len).filter_map(|i| key(i).map(|v| (i, v))).reduce(better)
}

fn better(a: (usize, f64), b: (usize, f64)) -> (usize, f64) {
    if b.1 > a.1 || (b.1 == a.1 && b.0 < a.0) {
        b
    } else {
        a
    }
}
