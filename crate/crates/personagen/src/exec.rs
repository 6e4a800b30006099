//! Execution strategy helpers.
//!
//! Numeric kernels in this crate run data-parallel via rayon when the
//! `parallel` feature is enabled (the default) and sequentially otherwise.
//! Each kernel keeps its reduction order fixed so both modes produce
//! bit-identical results; these helpers centralise the dispatch.
//!
//! [`run_bounded`] is independent of the feature flag: it provides the
//! bounded-concurrency fan-out used for backend I/O (LLM and embedding
//! requests), returning results in submission order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

/// Map `f` over `items`, preserving input order.
///
/// Runs on the rayon pool when the `parallel` feature is enabled and
/// `parallel` is true; otherwise sequentially. Results are identical in
/// either mode because each element is mapped independently.
pub fn map_ordered<T, R, F>(items: &[T], parallel: bool, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if parallel {
            use rayon::prelude::*;
            return items.par_iter().map(&f).collect();
        }
    }
    let _ = parallel;
    items.iter().map(f).collect()
}

/// Map `f` over the index range `0..n`, preserving index order.
pub fn map_range<R, F>(n: usize, parallel: bool, f: F) -> Vec<R>
where
    R: Send,
    F: Fn(usize) -> R + Sync,
{
    #[cfg(feature = "parallel")]
    {
        if parallel {
            use rayon::prelude::*;
            return (0..n).into_par_iter().map(&f).collect();
        }
    }
    let _ = parallel;
    (0..n).map(f).collect()
}

/// Run `f` over `items` with at most `limit` invocations in flight,
/// returning results in submission order.
///
/// Used for network-bound backend calls; unrelated to the `parallel`
/// feature. `limit <= 1` degrades to a plain sequential loop.
pub fn run_bounded<T, R, F>(items: &[T], limit: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = limit.max(1).min(items.len());
    if workers <= 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<R>>> = items.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= items.len() {
                    break;
                }
                let result = f(&items[i]);
                *slots[i].lock().expect("result slot poisoned") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|slot| {
            slot.into_inner()
                .expect("result slot poisoned")
                .expect("worker left a slot unfilled")
        })
        .collect()
}
