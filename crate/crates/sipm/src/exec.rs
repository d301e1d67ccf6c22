use rayon::prelude::*;
use sipm_core::ensemble::Executor;

use crate::error::{CliError, CliResult};

/// Environment variable that overrides the default worker count.
pub const THREADS_ENV: &str = "SIPM_THREADS";

/// Evaluates batches on a rayon pool. Results come back in batch order, so
/// output does not depend on the number of workers.
pub struct Parallel {
    pool: rayon::ThreadPool,
}

impl Parallel {
    /// `threads = None` falls back to `SIPM_THREADS`, then to one worker per
    /// available core.
    pub fn new(threads: Option<usize>) -> CliResult<Self> {
        let threads = match threads {
            Some(n) => n,
            None => match std::env::var(THREADS_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")))?,
                Err(_) => 0,
            },
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
        Ok(Self { pool })
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }
}

impl Executor for Parallel {
    fn map_batches<T, F>(&self, batches: usize, f: F) -> Vec<T>
    where
        T: Send,
        F: Fn(usize) -> T + Sync + Send,
    {
        self.pool.install(|| (0..batches).into_par_iter().map(f).collect())
    }
}
