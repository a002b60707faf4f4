//! Worker executor backed by a dedicated rayon pool.

use hin_embed_core::Executor;
use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuildError, ThreadPoolBuilder};

/// Runs at most `threads` tasks at once. Results come back in input order,
/// so output does not depend on the thread count.
pub struct RayonExecutor {
    pool: ThreadPool,
    threads: usize,
}

impl RayonExecutor {
    pub fn new(threads: usize) -> Result<Self, ThreadPoolBuildError> {
        let threads = threads.max(1);
        let pool = ThreadPoolBuilder::new()
            .num_threads(threads)
            .thread_name(|i| format!("hin-worker-{i}"))
            .build()?;
        Ok(RayonExecutor { pool, threads })
    }
}

impl Executor for RayonExecutor {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        if self.threads == 1 || items.len() < 2 {
            return items.into_iter().map(f).collect();
        }
        self.pool.install(|| items.into_par_iter().map(f).collect())
    }

    fn parallelism(&self) -> usize {
        self.threads
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_input_order() {
        let exec = RayonExecutor::new(4).unwrap();
        let out = exec.map((0..1000).collect(), |i: u64| i * i);
        assert_eq!(out, (0..1000).map(|i| i * i).collect::<Vec<_>>());
        assert_eq!(exec.parallelism(), 4);
    }
}
