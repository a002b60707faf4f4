//! Executors run independent units of work (one relation, one bucket pair,
//! one partition) and hand results back in input order. Output never depends
//! on which executor ran the work.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Applies `f` to every item; the result vector is in input order.
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send;

    /// Upper bound on concurrently running tasks.
    fn parallelism(&self) -> usize {
        1
    }
}

/// Runs everything on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        items.into_iter().map(f).collect()
    }
}
