//! Thin dispatch layer between rayon and plain iterators.
//!
//! Every search in this crate is expressed through these helpers so that the
//! `parallel` feature swaps the execution strategy without touching the
//! algorithms. All helpers are order-deterministic: `first_match` returns the
//! leftmost hit regardless of scheduling, `map_collect` preserves input order.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[cfg(feature = "parallel")]
pub(crate) fn first_match<T, R, F>(items: &[T], f: F) -> Option<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Option<R> + Sync + Send,
{
    items.par_iter().find_map_first(f)
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn first_match<T, R, F>(items: &[T], f: F) -> Option<R>
where
    F: Fn(&T) -> Option<R>,
{
    items.iter().find_map(f)
}

#[cfg(feature = "parallel")]
pub(crate) fn all<T, F>(items: &[T], f: F) -> bool
where
    T: Sync,
    F: Fn(&T) -> bool + Sync + Send,
{
    items.par_iter().all(f)
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn all<T, F>(items: &[T], f: F) -> bool
where
    F: Fn(&T) -> bool,
{
    items.iter().all(f)
}

/// Minimum of `f` over `items`, or `None` when empty. Ties resolve to the
/// smaller value itself, so the result does not depend on scheduling.
#[cfg(feature = "parallel")]
pub(crate) fn min_of<T, R, F>(items: &[T], f: F) -> Option<R>
where
    T: Sync,
    R: Ord + Send,
    F: Fn(&T) -> Option<R> + Sync + Send,
{
    items.par_iter().filter_map(f).min()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn min_of<T, R, F>(items: &[T], f: F) -> Option<R>
where
    R: Ord,
    F: Fn(&T) -> Option<R>,
{
    items.iter().filter_map(f).min()
}

/// Name of the active execution mode, used by benches and reports.
pub fn mode() -> &'static str {
    if cfg!(feature = "parallel") {
        "parallel"
    } else {
        "sequential"
    }
}
