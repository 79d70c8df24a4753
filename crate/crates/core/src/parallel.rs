//! Bounded fan-out for provider calls.

use std::thread;

/// Applies `f` to every item with at most `limit` calls in flight.
///
/// Results come back in input order, so callers aggregate deterministically
/// no matter which call finishes first. The first error (by index) wins.
pub fn map_bounded<T, R, E, F>(items: &[T], limit: usize, f: F) -> Result<Vec<R>, E>
where
    T: Sync,
    R: Send,
    E: Send,
    F: Fn(&T) -> Result<R, E> + Sync,
{
    if limit <= 1 || items.len() <= 1 {
        return items.iter().map(&f).collect();
    }
    let mut out = Vec::with_capacity(items.len());
    for chunk in items.chunks(limit) {
        let results: Vec<Result<R, E>> = thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|item| s.spawn(|| f(item))).collect();
            handles.into_iter().map(|h| h.join().expect("provider call panicked")).collect()
        });
        for r in results {
            out.push(r?);
        }
    }
    Ok(out)
}
