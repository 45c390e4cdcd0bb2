//! Runs independent trials, optionally on a thread pool, in index order.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Evaluates `f(0..trials)` and returns the results in trial order. Each trial
/// must derive its randomness from its index, so the result does not depend
/// on `jobs`.
pub fn map_trials<T, F>(trials: usize, jobs: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
{
    if jobs <= 1 || trials <= 1 {
        return (0..trials).map(f).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::invalid("jobs", e.to_string()))?;
    pool.install(|| (0..trials).into_par_iter().map(&f).collect())
}

/// Worker count from `--jobs`, defaulting to the available parallelism.
pub fn resolve_jobs(jobs: Option<usize>) -> usize {
    jobs.filter(|&j| j > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |p| p.get()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_is_independent_of_jobs() {
        let f = |i: usize| Ok(i * i);
        let serial = map_trials(50, 1, f).unwrap();
        let parallel = map_trials(50, 4, f).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial[7], 49);
    }

    #[test]
    fn errors_propagate() {
        let r: Result<Vec<usize>> = map_trials(10, 3, |i| if i == 5 { Err(Error::EmptyDataset) } else { Ok(i) });
        assert_eq!(r, Err(Error::EmptyDataset));
    }

    #[test]
    fn zero_trials() {
        assert!(map_trials(0, 4, Ok).unwrap().is_empty());
        assert_eq!(resolve_jobs(Some(3)), 3);
        assert!(resolve_jobs(None) >= 1);
    }
}
