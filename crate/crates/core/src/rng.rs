//! Deterministic random streams.
//!
//! All randomness flows from one `u64` seed. Independent consumers get
//! their own stream via [`substream`], keyed by a list of tags, so adding
//! a consumer never perturbs the draws seen by another one.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream(seed: u64, tags: &[u64]) -> Rng {
    let mut h = splitmix(seed);
    for &t in tags {
        h = splitmix(h ^ splitmix(t.wrapping_add(0x5851_F42D_4C95_7F2D)));
    }
    seeded(h)
}

/// Draws a fresh seed from an existing stream, for handing to a child.
pub fn fork(rng: &mut Rng) -> Rng {
    seeded(rng.next_u64())
}
