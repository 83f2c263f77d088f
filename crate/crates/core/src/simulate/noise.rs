use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::Result;

/// Independent stream for one replica; replica 0 is the single-path stream.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Brownian increments √h·ζ, drawn coordinate by coordinate.
pub struct Increments {
    rng: ChaCha8Rng,
    sqrt_h: f64,
}

impl Increments {
    pub fn new(seed: u64, replica: u64, h: f64) -> Self {
        Self {
            rng: replica_rng(seed, replica),
            sqrt_h: h.sqrt(),
        }
    }

    #[inline]
    pub fn fill(&mut self, out: &mut [f64]) {
        for o in out {
            let z: f64 = StandardNormal.sample(&mut self.rng);
            *o = self.sqrt_h * z;
        }
    }
}

/// Runs `f` for replicas 0..n in parallel; results come back in replica order.
pub fn par_replicas<T: Send>(n: usize, f: impl Fn(u64) -> Result<T> + Sync) -> Result<Vec<T>> {
    (0..n as u64).into_par_iter().map(|r| f(r)).collect()
}
