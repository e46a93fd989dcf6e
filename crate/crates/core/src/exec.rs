//! Execution policy for data-parallel inner loops.
//!
//! Every parallel loop in the crate is a "map over independent rows, then
//! combine in index order" computation, so the parallel and sequential paths
//! return the same bits.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Exec {
    Sequential,
    /// Uses rayon when built with the `parallel` feature, otherwise identical
    /// to [`Exec::Sequential`].
    #[default]
    Parallel,
}

impl Exec {
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == Exec::Parallel
    }

    /// Evaluates `f(i)` for `i in 0..n` and returns the results in index order.
    pub fn map_indices<T, F>(self, n: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return (0..n).into_par_iter().map(f).collect();
        }
        (0..n).map(f).collect()
    }

    /// Calls `f(row_index, row)` on each `width`-sized chunk of `buf`.
    pub fn for_each_row<T, F>(self, buf: &mut [T], width: usize, f: F)
    where
        T: Send,
        F: Fn(usize, &mut [T]) + Sync + Send,
    {
        if width == 0 {
            return;
        }
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            buf.par_chunks_mut(width)
                .enumerate()
                .for_each(|(i, row)| f(i, row));
            return;
        }
        buf.chunks_mut(width)
            .enumerate()
            .for_each(|(i, row)| f(i, row));
    }

    /// Like [`Exec::for_each_row`] but each row also yields a value, returned in
    /// row order.
    pub fn map_rows<T, R, F>(self, buf: &mut [T], width: usize, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(usize, &mut [T]) -> R + Sync + Send,
    {
        if width == 0 {
            return Vec::new();
        }
        #[cfg(feature = "parallel")]
        if self.is_parallel() {
            return buf
                .par_chunks_mut(width)
                .enumerate()
                .map(|(i, row)| f(i, row))
                .collect();
        }
        buf.chunks_mut(width)
            .enumerate()
            .map(|(i, row)| f(i, row))
            .collect()
    }
}
