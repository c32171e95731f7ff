//! Data-parallel helpers with a sequential fallback.
//!
//! With the `parallel` feature (default) the hot loops fan out over rayon;
//! without it the same entry points run sequentially. Both paths produce
//! bitwise-identical results: items are mapped independently and all
//! reductions happen in a fixed order afterwards.

/// Map `f` over `items`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_ordered<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    T: Sync,
    U: Send,
    F: Fn(&T) -> U + Sync + Send,
{
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

/// Map `f` over `items`, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_ordered<T, U, F>(items: &[T], f: F) -> Vec<U>
where
    F: Fn(&T) -> U,
{
    items.iter().map(f).collect()
}

/// Map `f` over `0..n`, preserving order.
#[cfg(feature = "parallel")]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    U: Send,
    F: Fn(usize) -> U + Sync + Send,
{
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

/// Map `f` over `0..n`, preserving order.
#[cfg(not(feature = "parallel"))]
pub fn map_range<U, F>(n: usize, f: F) -> Vec<U>
where
    F: Fn(usize) -> U,
{
    (0..n).map(f).collect()
}

/// Cap the worker count from the `BOWRNN_THREADS` environment variable.
///
/// Call once at startup. Does nothing if the variable is unset, unparsable,
/// or the pool was already initialized. A no-op without the `parallel`
/// feature.
pub fn configure_threads_from_env() {
    let Ok(raw) = std::env::var("BOWRNN_THREADS") else {
        return;
    };
    let Ok(threads) = raw.trim().parse::<usize>() else {
        log::warn!("ignoring unparsable BOWRNN_THREADS={raw:?}");
        return;
    };
    set_threads(threads.max(1));
}

#[cfg(feature = "parallel")]
fn set_threads(threads: usize) {
    if rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .is_err()
    {
        log::warn!("thread pool already initialized, BOWRNN_THREADS ignored");
    }
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_threads: usize) {}
