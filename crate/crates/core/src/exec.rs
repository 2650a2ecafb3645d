//! Data-parallel helpers with a sequential fallback.
//!
//! Every helper returns results in index order, so reductions over the
//! output are independent of how the work was scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "COVMAX_THREADS";

/// Worker count requested through `COVMAX_THREADS`, if set and valid.
pub fn env_workers() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}

/// Resolve an explicit worker request against the environment cap.
pub fn resolve_workers(requested: Option<usize>) -> usize {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let base = requested.unwrap_or(available).max(1);
    match env_workers() {
        Some(cap) => base.min(cap),
        None => base,
    }
}

/// Evaluate `f(0), …, f(count - 1)` and collect the results in index order.
///
/// `workers == Some(1)` always runs on the calling thread.
#[cfg(feature = "parallel")]
pub fn map_indexed<T, F>(count: usize, workers: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    use rayon::prelude::*;

    let workers = resolve_workers(workers);
    if workers == 1 || count < 2 {
        return (0..count).map(f).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(|| (0..count).into_par_iter().map(&f).collect()),
        Err(_) => (0..count).map(f).collect(),
    }
}

#[cfg(not(feature = "parallel"))]
pub fn map_indexed<T, F>(count: usize, _workers: Option<usize>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    (0..count).map(f).collect()
}

/// Like [`map_indexed`] for fallible work; the first error in index order wins.
pub fn try_map_indexed<T, E, F>(count: usize, workers: Option<usize>, f: F) -> Result<Vec<T>, E>
where
    T: Send,
    E: Send,
    F: Fn(usize) -> Result<T, E> + Sync + Send,
{
    map_indexed(count, workers, f).into_iter().collect()
}

/// RNG for replication `rep`: the master seed selects the key and the
/// replication index selects an independent ChaCha stream.
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preserves_order() {
        for w in [1, 2, 8] {
            let out = map_indexed(100, Some(w), |i| i * i);
            assert_eq!(out, (0..100).map(|i| i * i).collect::<Vec<_>>());
        }
    }

    #[test]
    fn first_error_in_index_order() {
        let r: Result<Vec<usize>, usize> =
            try_map_indexed(10, Some(4), |i| if i % 4 == 3 { Err(i) } else { Ok(i) });
        assert_eq!(r, Err(3));
    }
}
