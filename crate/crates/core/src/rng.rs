//! Seeded random streams.
//!
//! Every stochastic step draws from a ChaCha8 stream keyed by the run seed
//! and a tuple of counters (epoch, batch, item, ...), so any single draw can
//! be regenerated without replaying the ones before it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent stream for `(seed, parts...)`.
pub fn substream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let mut key = splitmix64(seed);
    for &p in parts {
        key = splitmix64(key ^ splitmix64(p));
    }
    let mut bytes = [0u8; 32];
    let mut state = key;
    for chunk in bytes.chunks_mut(8) {
        state = splitmix64(state);
        chunk.copy_from_slice(&state.to_le_bytes());
    }
    ChaCha8Rng::from_seed(bytes)
}

/// Standard normal pair by Box–Muller.
pub fn gaussian_pair<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    // u1 in (0, 1] keeps the logarithm finite.
    let u1 = 1.0 - rng.random::<f64>();
    let u2 = rng.random::<f64>();
    let r = (-2.0 * u1.ln()).sqrt();
    let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
    (r * c, r * s)
}
