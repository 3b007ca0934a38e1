//! Seeded, batch-parallel sampling driver shared by the certificate verifiers.
//!
//! Samples are split into fixed-size batches; each batch owns an RNG derived
//! deterministically from (seed, batch index), batches run in parallel, and
//! the per-batch minima are folded in batch order. The result is bit-identical
//! regardless of thread count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::phase_space::PolarState;
use crate::real::Real;

const BATCH: u64 = 8192;

/// How a sampled verifier draws its points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleSpec {
    /// RNG seed; identical seeds reproduce reports byte for byte.
    pub seed: u64,
    /// Total number of draws (some may be rejected by the set's constraints).
    pub count: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 100_000,
        }
    }
}

impl SampleSpec {
    pub fn new(seed: u64, count: u64) -> Self {
        Self { seed, count }
    }
}

/// Running minima of a primary and a secondary margin.
pub(crate) struct MarginStats<R> {
    pub accepted: u64,
    pub min_margin: R,
    pub worst: Option<PolarState<R>>,
    pub min_bound: R,
}

impl<R: Real> MarginStats<R> {
    fn empty() -> Self {
        Self {
            accepted: 0,
            min_margin: R::infinity(),
            worst: None,
            min_bound: R::infinity(),
        }
    }

    fn absorb(&mut self, margin: R, bound: R, point: PolarState<R>) {
        self.accepted += 1;
        if margin < self.min_margin {
            self.min_margin = margin;
            self.worst = Some(point);
        }
        if bound < self.min_bound {
            self.min_bound = bound;
        }
    }

    fn merge(mut self, other: Self) -> Self {
        self.accepted += other.accepted;
        if other.min_margin < self.min_margin {
            self.min_margin = other.min_margin;
            self.worst = other.worst;
        }
        if other.min_bound < self.min_bound {
            self.min_bound = other.min_bound;
        }
        self
    }
}

/// Draws `spec.count` samples via `draw`, which returns
/// `Some((margin, bound_margin, point))` for admissible points and `None` for
/// rejected draws, and folds the minima deterministically.
pub(crate) fn sample_margins<R, F>(spec: &SampleSpec, draw: F) -> MarginStats<R>
where
    R: Real,
    F: Fn(&mut ChaCha8Rng) -> Option<(R, R, PolarState<R>)> + Sync,
{
    let batches = spec.count.div_ceil(BATCH);
    (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(mix(spec.seed, b));
            let n = BATCH.min(spec.count - b * BATCH);
            let mut stats = MarginStats::empty();
            for _ in 0..n {
                if let Some((margin, bound, point)) = draw(&mut rng) {
                    stats.absorb(margin, bound, point);
                }
            }
            stats
        })
        .collect::<Vec<_>>()
        .into_iter()
        .fold(MarginStats::empty(), MarginStats::merge)
}

/// Uniform draw in `[lo, hi)` taken through f64 so every scalar type sees the
/// same underlying stream.
pub(crate) fn uniform<R: Real>(rng: &mut ChaCha8Rng, lo: R, hi: R) -> R {
    lo + (hi - lo) * R::of(rng.gen::<f64>())
}

pub(crate) fn coin(rng: &mut ChaCha8Rng) -> bool {
    rng.gen::<f64>() < 0.5
}

fn mix(seed: u64, batch: u64) -> u64 {
    splitmix64(seed ^ batch.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

use rand::SeedableRng;
