//! Execution strategy for the data-parallel loops in this crate.
//!
//! With the `parallel` feature the work is spread over the rayon global pool;
//! without it every call degrades to a plain sequential iterator. Both paths
//! preserve input order, so results are identical either way.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mode {
    Sequential,
    #[default]
    Auto,
}

impl Mode {
    pub fn is_parallel(self) -> bool {
        matches!(self, Mode::Auto) && cfg!(feature = "parallel")
    }
}

/// Order-preserving map over a slice.
pub fn map<T, R, F>(mode: Mode, items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if mode.is_parallel() {
        use rayon::prelude::*;
        return items.par_iter().map(f).collect();
    }
    let _ = mode;
    items.iter().map(f).collect()
}
