use rayon::prelude::*;

use crate::error::{config_err, Result};

/// Bounded work pool for independent rollouts.
///
/// `map` returns results in input order regardless of the worker count, and
/// callers reduce sequentially, so output never depends on scheduling.
pub struct WorkPool {
    workers: usize,
    pool: Option<rayon::ThreadPool>,
}

impl WorkPool {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(config_err("worker count must be at least 1"));
        }
        let pool = if workers == 1 {
            None
        } else {
            Some(
                rayon::ThreadPoolBuilder::new()
                    .num_threads(workers)
                    .build()
                    .map_err(|e| config_err(format!("thread pool: {e}")))?,
            )
        };
        Ok(Self { workers, pool })
    }

    pub fn sequential() -> Self {
        Self {
            workers: 1,
            pool: None,
        }
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        match &self.pool {
            None => items.iter().map(f).collect(),
            Some(pool) => pool.install(|| items.par_iter().map(f).collect()),
        }
    }

    /// Maps over `0..n`.
    pub fn map_range<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        match &self.pool {
            None => (0..n).map(f).collect(),
            Some(pool) => pool.install(|| (0..n).into_par_iter().map(f).collect()),
        }
    }
}

impl Default for WorkPool {
    fn default() -> Self {
        Self::sequential()
    }
}

impl std::fmt::Debug for WorkPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkPool").field("workers", &self.workers).finish()
    }
}
