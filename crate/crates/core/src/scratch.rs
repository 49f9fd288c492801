//! Per-thread pool of `f64` buffers reused across solver iterations.

use std::cell::RefCell;

const POOL_LIMIT: usize = 16;

thread_local! {
    static POOL: RefCell<Vec<Vec<f64>>> = const { RefCell::new(Vec::new()) };
}

/// A zero-filled buffer of length `len`, reusing the smallest pooled
/// allocation that fits.
pub(crate) fn zeroed(len: usize) -> Vec<f64> {
    let mut v = POOL
        .with(|pool| {
            let mut pool = pool.borrow_mut();
            let best = pool
                .iter()
                .enumerate()
                .filter(|(_, v)| v.capacity() >= len)
                .min_by_key(|(_, v)| v.capacity())
                .map(|(i, _)| i);
            best.map(|i| pool.swap_remove(i))
        })
        .unwrap_or_default();
    v.clear();
    v.resize(len, 0.0);
    v
}

/// Returns a buffer to the pool.
pub(crate) fn recycle(v: Vec<f64>) {
    POOL.with(|pool| {
        let mut pool = pool.borrow_mut();
        if pool.len() < POOL_LIMIT {
            pool.push(v);
        }
    });
}
