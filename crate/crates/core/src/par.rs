//! Data-parallel fan-out with a sequential fallback.
//!
//! Every helper returns results in index order so reductions downstream are
//! performed in a fixed order and are bitwise reproducible regardless of the
//! execution mode or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// How per-path (or per-subtree) work is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Rayon work stealing. Degrades to [`Execution::Sequential`] when the
    /// crate is built without the `parallel` feature.
    Parallel,
}

impl Default for Execution {
    fn default() -> Self {
        if cfg!(feature = "parallel") {
            Execution::Parallel
        } else {
            Execution::Sequential
        }
    }
}

/// Evaluates `f(0..n)` and returns the results in index order.
pub fn map_range<T, F>(n: usize, exec: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            (0..n).into_par_iter().map(f).collect()
        }
        _ => (0..n).map(f).collect(),
    }
}

/// Generator for path `index` of a run seeded with `seed`.
///
/// Paths use disjoint ChaCha streams of one key, so path `i` sees the same
/// outcomes no matter how many paths are drawn or in what order.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
