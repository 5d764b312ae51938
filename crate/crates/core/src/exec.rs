//! Data-parallel helpers. With the `parallel` feature they run on rayon's
//! global pool; without it, or with [`Execution::Sequential`], they run on the
//! calling thread. Both paths produce identical, order-preserving output.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Execution {
    Sequential,
    /// Falls back to sequential when built without the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

impl Execution {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Execution::Parallel
    }
}

pub(crate) fn sort_unstable<T: Ord + Send>(exec: Execution, items: &mut [T]) {
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        items.par_sort_unstable();
        return;
    }
    let _ = exec;
    items.sort_unstable();
}

/// Maps `f` over `items`, keeping input order.
pub(crate) fn map<T, R, F>(exec: Execution, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if exec.is_parallel() {
        return items.par_iter().map(f).collect();
    }
    let _ = exec;
    items.iter().map(f).collect()
}
