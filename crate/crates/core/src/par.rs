//! Data-parallel helpers with a sequential fallback.
//!
//! Every fan-out in the crate (member rollouts, finite-difference gradient
//! components, multi-start restarts, exhaustive binary search) goes through
//! [`map_indexed`]. Results always come back in index order so parallel and
//! sequential runs are bit-identical. Without the `parallel` feature,
//! [`ExecMode::Parallel`] silently runs sequentially.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExecMode {
    Sequential,
    #[default]
    Parallel,
}

impl ExecMode {
    /// True when work will actually be spread over a thread pool.
    pub fn is_parallel(self) -> bool {
        cfg!(feature = "parallel") && self == ExecMode::Parallel
    }
}

/// Applies `f` to `0..n` and collects the results in index order.
pub fn map_indexed<T, F>(mode: ExecMode, n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    if mode == ExecMode::Parallel {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    let _ = mode;
    (0..n).map(f).collect()
}

/// Like [`map_indexed`] but short-circuits on the first error (lowest index wins
/// in sequential mode; in parallel mode the reported error is the lowest index
/// among those that failed).
pub fn try_map_indexed<T, E, F>(mode: ExecMode, n: usize, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Send + Sync,
{
    map_indexed(mode, n, f).into_iter().collect()
}

/// Evaluates `f` over `0..n` in index order and stops after the first result
/// satisfying `done`. Parallel mode evaluates batches of one index per worker;
/// results past the first success are dropped, so the output does not depend
/// on the batch size.
pub fn run_until<T, E, F, D>(mode: ExecMode, n: usize, f: F, done: D) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Send + Sync,
    D: Fn(&T) -> bool,
{
    let batch = workers(mode);
    let mut out = Vec::new();
    let mut start = 0;
    while start < n {
        let len = batch.min(n - start);
        let chunk = try_map_indexed(mode, len, |i| f(start + i))?;
        for r in chunk {
            let stop = done(&r);
            out.push(r);
            if stop {
                return Ok(out);
            }
        }
        start += len;
    }
    Ok(out)
}

fn workers(mode: ExecMode) -> usize {
    #[cfg(feature = "parallel")]
    if mode == ExecMode::Parallel {
        return rayon::current_num_threads().max(1);
    }
    let _ = mode;
    1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parallel_and_sequential_agree() {
        let f = |i: usize| (i as f64).sqrt().sin();
        let a = map_indexed(ExecMode::Sequential, 1000, f);
        let b = map_indexed(ExecMode::Parallel, 1000, f);
        assert_eq!(a, b);
    }

    #[test]
    fn first_error_in_index_order() {
        let r: Result<Vec<usize>, usize> =
            try_map_indexed(ExecMode::Parallel, 10, |i| if i % 4 == 3 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(3));
    }

    #[test]
    fn run_until_truncates_at_first_success() {
        for mode in [ExecMode::Sequential, ExecMode::Parallel] {
            let r: Result<Vec<usize>, ()> = run_until(mode, 10, |i| Ok(i * i), |v| *v > 10);
            assert_eq!(r, Ok(vec![0, 1, 4, 9, 16]));
        }
    }
}
