//! Seed-space sweeps shared by the exact and Monte-Carlo oracles.
//!
//! Both sweeps split the work into fixed blocks and merge per-block
//! accumulators in block order, so results do not depend on the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::seed::SeedBits;

/// Largest seed length enumerated exhaustively.
pub const EXHAUSTIVE_LIMIT: usize = 24;

const BLOCK: u64 = 4096;

/// How an oracle visits seeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    Exhaustive,
    /// `samples` seeds drawn from ChaCha8 keyed by `run_seed`.
    MonteCarlo { samples: u64, run_seed: u64 },
}

impl Sampling {
    /// Number of seeds visited for a seed space of `bits` bits.
    pub fn count(&self, bits: usize) -> u64 {
        match *self {
            Sampling::Exhaustive => 1u64 << bits,
            Sampling::MonteCarlo { samples, .. } => samples,
        }
    }

    pub fn is_exhaustive(&self) -> bool {
        matches!(self, Sampling::Exhaustive)
    }
}

/// Folds `visit` over seeds of `bits` bits. `make` creates a per-block
/// accumulator; blocks are merged left to right with `merge`.
pub fn fold_seeds<A, Make, Visit, Merge>(
    bits: usize,
    sampling: Sampling,
    make: Make,
    visit: Visit,
    merge: Merge,
) -> Result<A>
where
    A: Send,
    Make: Fn() -> A + Sync,
    Visit: Fn(&mut A, &SeedBits) + Sync,
    Merge: Fn(A, A) -> A + Sync,
{
    let total = match sampling {
        Sampling::Exhaustive => {
            if bits > EXHAUSTIVE_LIMIT {
                return Err(Error::TooLargeForExhaustive {
                    bits,
                    limit: EXHAUSTIVE_LIMIT,
                });
            }
            1u64 << bits
        }
        Sampling::MonteCarlo { samples, .. } => samples,
    };
    let blocks = total.div_ceil(BLOCK);
    let parts: Vec<A> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = make();
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(total);
            match sampling {
                Sampling::Exhaustive => {
                    let mut seed = SeedBits::zeros(bits);
                    for s in lo..hi {
                        seed.set_u64(s);
                        visit(&mut acc, &seed);
                    }
                }
                Sampling::MonteCarlo { run_seed, .. } => {
                    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
                    rng.set_stream(b);
                    for _ in lo..hi {
                        let seed = SeedBits::random(bits, &mut rng);
                        visit(&mut acc, &seed);
                    }
                }
            }
            acc
        })
        .collect();
    Ok(parts.into_iter().reduce(merge).unwrap_or_else(make))
}

/// Number of seeds satisfying `pred`.
pub fn count_seeds<P>(bits: usize, sampling: Sampling, pred: P) -> Result<u64>
where
    P: Fn(&SeedBits) -> bool + Sync,
{
    fold_seeds(
        bits,
        sampling,
        || 0u64,
        |acc, s| *acc += pred(s) as u64,
        |a, b| a + b,
    )
}
