//! Seeded, counter-based random streams.
//!
//! Every random object is drawn from a ChaCha stream identified by a
//! `(seed, stream)` pair, so results never depend on how many values some
//! other consumer drew first.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Derives the seed of a sub-object, e.g. the `k`-th measure of a random rep.
pub fn derive(seed: u64, path: &[u64]) -> u64 {
    // splitmix64 finalizer applied along the path
    let mut z = seed;
    for &p in path {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(p.wrapping_mul(0xD1B5_4A32_D192_ED03));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}
