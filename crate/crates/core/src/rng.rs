//! Named random sub-streams derived from a single root seed.
//!
//! Every consumer of randomness (dataset generation, parameter init, attacks)
//! draws from its own ChaCha stream so that adding draws in one place never
//! shifts the numbers seen by another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a, used only to turn a stream name into a stream id.
fn stream_id(name: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in name.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

/// Deterministic generator for the sub-stream `name` of `root_seed`.
pub fn stream(root_seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(stream_id(name));
    rng
}
