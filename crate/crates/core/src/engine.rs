//! Path-level execution. Paths are grouped into fixed chunks of
//! [`CHUNK_SIZE`]; each chunk is folded in index order and chunk results are
//! merged in chunk order, so reductions do not depend on the worker count.
//!
//! With the `parallel` feature (default) chunks run on a rayon pool;
//! without it every engine runs sequentially.

use std::ops::Range;
#[cfg(feature = "parallel")]
use std::sync::Arc;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimate::Moments;

pub const CHUNK_SIZE: usize = 1024;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "MONOSDE_WORKERS";

#[derive(Clone, Default)]
pub struct Engine {
    #[cfg(feature = "parallel")]
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine").field("workers", &self.workers()).finish()
    }
}

impl Engine {
    pub fn sequential() -> Self {
        Self::default()
    }

    /// Engine with `workers` threads; `0` lets rayon pick. Falls back to
    /// sequential execution when built without the `parallel` feature.
    pub fn parallel(workers: usize) -> Self {
        #[cfg(feature = "parallel")]
        {
            if workers == 1 {
                return Self::sequential();
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .thread_name(|i| format!("monosde-{i}"))
                .build()
                .expect("failed to build thread pool");
            Self {
                pool: Some(Arc::new(pool)),
            }
        }
        #[cfg(not(feature = "parallel"))]
        {
            let _ = workers;
            Self::sequential()
        }
    }

    /// Worker count from `MONOSDE_WORKERS`, defaulting to all cores.
    pub fn from_env() -> Self {
        let workers = std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .unwrap_or(0);
        Self::parallel(workers)
    }

    pub fn workers(&self) -> usize {
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.current_num_threads();
        }
        1
    }

    /// Apply `f` to each fixed chunk of `0..n`; results come back in chunk order.
    pub fn map_chunks<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(Range<usize>) -> R + Sync + Send,
    {
        let n_chunks = n.div_ceil(CHUNK_SIZE);
        let chunk = |c: usize| f(c * CHUNK_SIZE..((c + 1) * CHUNK_SIZE).min(n));
        #[cfg(feature = "parallel")]
        if let Some(pool) = &self.pool {
            return pool.install(|| (0..n_chunks).into_par_iter().map(chunk).collect());
        }
        (0..n_chunks).map(chunk).collect()
    }

    /// Indexed map over `0..n`, results in index order.
    pub fn map<R, F>(&self, n: usize, f: F) -> Vec<R>
    where
        R: Send,
        F: Fn(usize) -> R + Sync + Send,
    {
        self.map_chunks(n, |range| range.map(&f).collect::<Vec<_>>())
            .into_iter()
            .flatten()
            .collect()
    }
}

/// What an estimator does with a path that fails numerically.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DivergencePolicy {
    /// Abort with the failure of the lowest-indexed failing path.
    #[default]
    Fail,
    /// Count the path as diverged and leave it out of the statistics.
    Exclude,
}

#[derive(Debug, Clone)]
pub struct PathReduction {
    pub moments: Moments,
    pub diverged: usize,
}

/// Reduce per-path sample vectors of length `dim` into moments.
pub fn reduce_paths<F>(
    engine: &Engine,
    n_paths: usize,
    dim: usize,
    policy: DivergencePolicy,
    f: F,
) -> Result<PathReduction>
where
    F: Fn(u64) -> Result<Vec<f64>> + Sync + Send,
{
    let chunks = engine.map_chunks(n_paths, |range| {
        let mut moments = Moments::new(dim);
        let mut diverged = 0usize;
        for i in range {
            match f(i as u64) {
                Ok(sample) => moments.push(&sample),
                Err(e) if e.is_path_failure() && policy == DivergencePolicy::Exclude => {
                    diverged += 1
                }
                Err(e) => return Err(e),
            }
        }
        Ok::<_, Error>((moments, diverged))
    });
    let mut total = PathReduction {
        moments: Moments::new(dim),
        diverged: 0,
    };
    for chunk in chunks {
        let (m, d) = chunk?;
        total.moments.merge(&m);
        total.diverged += d;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(i: u64) -> Result<Vec<f64>> {
        let x = ((i * 2654435761) % 1000) as f64 / 7.0;
        Ok(vec![x, x.sin()])
    }

    #[test]
    fn reduction_is_worker_independent() {
        let n = 5000;
        let a = reduce_paths(&Engine::sequential(), n, 2, DivergencePolicy::Fail, sample).unwrap();
        let b = reduce_paths(&Engine::parallel(4), n, 2, DivergencePolicy::Fail, sample).unwrap();
        let c = reduce_paths(&Engine::parallel(3), n, 2, DivergencePolicy::Fail, sample).unwrap();
        assert_eq!(a.moments, b.moments);
        assert_eq!(a.moments, c.moments);
    }

    #[test]
    fn map_keeps_order() {
        let v = Engine::parallel(4).map(3000, |i| i * 2);
        assert!(v.iter().enumerate().all(|(i, &x)| x == 2 * i));
    }

    #[test]
    fn failures_follow_policy() {
        let f = |i: u64| {
            if i % 10 == 3 {
                Err(Error::Divergence { step: i as usize, time: 0.0 })
            } else {
                Ok(vec![1.0])
            }
        };
        let r = reduce_paths(&Engine::parallel(2), 100, 1, DivergencePolicy::Exclude, f).unwrap();
        assert_eq!(r.diverged, 10);
        assert_eq!(r.moments.count(), 90);
        let e = reduce_paths(&Engine::parallel(2), 100, 1, DivergencePolicy::Fail, f).unwrap_err();
        assert_eq!(e, Error::Divergence { step: 3, time: 0.0 });
    }
}
