//! Fixed-size worker pool for the parallel read-only phases.
//!
//! Every parallel map is order-preserving and computes each item
//! independently, so results do not depend on the worker count.

use std::sync::Arc;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};

#[derive(Clone)]
pub struct WorkerPool {
    workers: usize,
    pool: Arc<ThreadPool>,
}

impl std::fmt::Debug for WorkerPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkerPool").field("workers", &self.workers).finish()
    }
}

impl WorkerPool {
    /// Pool with exactly `workers` threads; 0 means one per logical core.
    pub fn new(workers: usize) -> Self {
        let workers = if workers == 0 { std::thread::available_parallelism().map_or(1, |n| n.get()) } else { workers };
        let pool = ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("slut-worker-{i}"))
            .build()
            .expect("failed to build worker pool");
        Self { workers, pool: Arc::new(pool) }
    }

    pub fn single() -> Self {
        Self::new(1)
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn install<F, R>(&self, f: F) -> R
    where
        F: FnOnce() -> R + Send,
        R: Send,
    {
        self.pool.install(f)
    }

    pub fn map<T, U, F>(&self, items: &[T], f: F) -> Vec<U>
    where
        T: Sync,
        U: Send,
        F: Fn(&T) -> U + Sync + Send,
    {
        self.install(|| items.par_iter().map(f).collect())
    }

    pub fn try_map<T, U, E, F>(&self, items: &[T], f: F) -> Result<Vec<U>, E>
    where
        T: Sync,
        U: Send,
        E: Send,
        F: Fn(&T) -> Result<U, E> + Sync + Send,
    {
        self.install(|| items.par_iter().map(f).collect())
    }
}

impl Default for WorkerPool {
    fn default() -> Self {
        Self::new(0)
    }
}
