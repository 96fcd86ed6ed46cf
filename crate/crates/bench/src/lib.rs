//! Shared fixtures for the benchmarks.

use ecqi_core::link::{CbSinrProfile, CbgLayout};
use ecqi_core::prob::CbgErrorVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random CBG error vectors of length `m`, reproducible from `seed`.
pub fn error_vectors(m: usize, count: usize, seed: u64) -> Vec<CbgErrorVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let p = (0..m).map(|_| rng.gen_range(1e-4..0.5)).collect();
            CbgErrorVector::new(p).expect("valid probabilities")
        })
        .collect()
}

/// Per-CB SINR profiles with `c` code blocks in `m` groups, spread around `center_db`.
pub fn profiles(c: usize, m: usize, center_db: f64, count: usize, seed: u64) -> Vec<CbSinrProfile> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let sinr = (0..c)
                .map(|_| center_db + rng.gen_range(-6.0..6.0))
                .collect();
            CbSinrProfile::new(sinr, CbgLayout::new(c, m).expect("valid layout"))
                .expect("valid profile")
        })
        .collect()
}
