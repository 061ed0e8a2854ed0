//! Data-parallel helpers with a sequential fallback.
//!
//! Every reduction routed through here must be associative and commutative:
//! results are then identical whichever [`Execution`] mode (or thread count)
//! runs them.

use std::ops::Range;

/// How independent work items are scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    /// Plain iterator on the calling thread.
    Sequential,
    /// Rayon work stealing on the current pool. Falls back to
    /// [`Execution::Sequential`] when the `parallel` feature is disabled.
    #[default]
    Parallel,
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

/// Maps every index of `range` and folds the results with `reduce`.
pub fn map_reduce<T, M, R, I>(exec: Execution, range: Range<u64>, identity: I, map: M, reduce: R) -> T
where
    T: Send,
    M: Fn(u64) -> T + Sync + Send,
    R: Fn(T, T) -> T + Sync + Send,
    I: Fn() -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        use rayon::prelude::*;
        return range.into_par_iter().map(map).reduce(identity, reduce);
    }
    let _ = exec;
    range.map(map).fold(identity(), reduce)
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon default).
///
/// Without the `parallel` feature the closure simply runs inline.
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    #[cfg(feature = "parallel")]
    {
        match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        }
    }
    #[cfg(not(feature = "parallel"))]
    {
        let _ = threads;
        f()
    }
}
