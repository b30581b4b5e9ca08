//! Counter-based random streams.
//!
//! Every random draw in the crate is a pure function of `(seed, stream, index)`
//! so that per-cycle thresholds, per-cycle noise and per-trial inputs never
//! depend on evaluation order or thread count.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream used for flaky-threshold draws.
pub const THRESHOLD_STREAM: u64 = 1;
/// Stream used for additive arithmetic noise.
pub const NOISE_STREAM: u64 = 2;
/// Stream used for parameter jitter (e.g. per-cycle gain).
pub const JITTER_STREAM: u64 = 3;

/// Uniform draw in `[0, 1)` at position `index` of `(seed, stream)`.
pub fn uniform_at(seed: u64, stream: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    // one u64 is two 32-bit words
    rng.set_word_pos(u128::from(index) * 2);
    unit_f64(rng.next_u64())
}

/// 53-bit mantissa conversion to `[0, 1)`.
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Derives an independent seed for trial `trial` of an experiment seeded with `seed`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ trial.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Sequential generator for per-trial draws (input value, etc.).
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}
