//! Deterministic random streams for reproducible, parallel Monte Carlo.
//!
//! Every simulation splits its trials into fixed-size batches. Batch `i`
//! draws from a ChaCha8 generator seeded with the run seed and switched to
//! stream `i`, so results do not depend on how rayon schedules batches or
//! on the number of worker threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Generator used by every stochastic routine in the crate.
pub type Generator = ChaCha8Rng;

/// Name of the generator algorithm, echoed in run reports.
pub const GENERATOR_NAME: &str = "ChaCha8 (rand_chacha), stream per batch";

/// Seed handle for a family of independent random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SimRng {
    seed: u64,
}

impl SimRng {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent seed family, e.g. for the H0 and H1 halves of a
    /// detection run.
    pub fn fork(&self, label: u64) -> SimRng {
        SimRng { seed: splitmix64(self.seed ^ splitmix64(label.wrapping_add(0x9E37_79B9_7F4A_7C15))) }
    }

    /// Generator for stream `stream` of this family.
    pub fn stream(&self, stream: u64) -> Generator {
        let mut g = ChaCha8Rng::seed_from_u64(self.seed);
        g.set_stream(stream);
        g
    }

    /// Generator for stream 0.
    pub fn generator(&self) -> Generator {
        self.stream(0)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Run `trials` trials in batches of `batch_size`, in parallel.
///
/// `work(rng, first_trial, count)` runs one batch; outputs come back in
/// batch order so the caller's reduction is deterministic.
pub fn run_batches<T, F>(rng: &SimRng, trials: u64, batch_size: u64, work: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut Generator, u64, u64) -> T + Sync,
{
    let batch_size = batch_size.max(1);
    let batches = trials.div_ceil(batch_size);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let first = b * batch_size;
            let count = batch_size.min(trials - first);
            let mut g = rng.stream(b);
            work(&mut g, first, count)
        })
        .collect()
}
