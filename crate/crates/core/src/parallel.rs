//! Worker-pool sizing. `PRUNELAB_THREADS` caps the number of workers; every
//! parallel section produces the same results regardless of the count.

use rayon::prelude::*;

pub const THREADS_ENV: &str = "PRUNELAB_THREADS";

pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
}

/// Maps `f` over `items` on a pool sized by [`thread_cap`], keeping order.
pub fn map_ordered<I, O, F>(items: &[I], f: F) -> Vec<O>
where
    I: Sync,
    O: Send,
    F: Fn(&I) -> O + Sync + Send,
{
    let run = || items.par_iter().map(&f).collect();
    match thread_cap() {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(_) => items.iter().map(&f).collect(),
        },
        None => run(),
    }
}
