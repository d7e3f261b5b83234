//! Deterministic fan-out of independent trials across threads.
//!
//! Results are written into per-index slots, so the output is identical for
//! any thread count. `GAPFORGE_THREADS` caps the worker count.

/// Maps `f` over `0..n`, possibly in parallel; output order is by index.
pub fn map_indexed<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let threads = thread_cap().min(n.max(1));
    if threads <= 1 || n <= 1 {
        return (0..n).map(f).collect();
    }
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let chunk = n.div_ceil(threads);
    std::thread::scope(|scope| {
        for (ti, slice) in slots.chunks_mut(chunk).enumerate() {
            let f = &f;
            scope.spawn(move || {
                for (off, slot) in slice.iter_mut().enumerate() {
                    *slot = Some(f(ti * chunk + off));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.unwrap()).collect()
}

/// Worker cap: `GAPFORGE_THREADS` if set, else the machine's parallelism.
pub fn thread_cap() -> usize {
    if let Ok(v) = std::env::var("GAPFORGE_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
