//! Seeded random streams.
//!
//! Every draw in the simulator comes from a xoshiro256++ generator seeded via
//! SplitMix64 (`SeedableRng::seed_from_u64`). Independent sub-streams are
//! derived from a `(seed, index)` pair so Monte-Carlo results do not depend on
//! how trials are scheduled across threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;

pub type SimRng = Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// Generator for the base stream of `seed`.
pub fn seeded(seed: u64) -> SimRng {
    SimRng::seed_from_u64(seed)
}

/// Generator for sub-stream `index` of `seed`.
pub fn substream(seed: u64, index: u64) -> SimRng {
    let mut mix = SimRng::seed_from_u64(seed ^ index.wrapping_add(1).wrapping_mul(GOLDEN));
    SimRng::seed_from_u64(mix.random::<u64>())
}

/// Real Gaussian sample with the given variance.
pub fn gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> f64 {
    let z: f64 = rng.sample(StandardNormal);
    z * variance.sqrt()
}

/// Circularly symmetric complex Gaussian sample with total variance `variance`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re * s, im * s)
}
