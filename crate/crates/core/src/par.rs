//! Replication scheduling and random streams.
//!
//! Every replication draws from its own ChaCha stream, keyed by the master
//! seed, a purpose tag and the replication index. Results are collected in
//! replication order, so output is identical whether the `parallel` feature is
//! on or off and regardless of the rayon pool size.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Source of independent, reproducible per-replication RNGs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn rng(&self, purpose: u64, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.seed ^ splitmix64(purpose)));
        rng.set_stream(index);
        rng
    }

    /// Derive an independent family of streams.
    pub fn fork(&self, purpose: u64) -> Streams {
        Streams { seed: splitmix64(self.seed.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(purpose | 1) ^ purpose) }
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Run `f` for every replication index in `0..reps`, in parallel when the
/// `parallel` feature is enabled. Output order follows the index.
#[cfg(feature = "parallel")]
pub fn map_replications<T, F>(reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..reps).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn map_replications<T, F>(reps: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    (0..reps).map(f).collect()
}

/// Sequential reference path, always available (benchmarks compare it with
/// [`map_replications`]).
pub fn map_replications_seq<T, F>(reps: u64, f: F) -> Vec<T>
where
    F: Fn(u64) -> T,
{
    (0..reps).map(f).collect()
}
