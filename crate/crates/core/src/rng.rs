//! Seeded random streams.
//!
//! Every stochastic component takes an explicit generator. Independent
//! streams are derived from a master seed and a path of stream tags so that
//! results do not depend on scheduling or on how much randomness other
//! components consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream tags used by the active-learning loop.
pub mod tags {
    pub const TRUTH: u64 = 0x7472_7574;
    pub const EXPERT: u64 = 0x6578_7074;
    pub const MCMC: u64 = 0x6d63_6d63;
    pub const ACQUIRE: u64 = 0x6163_7172;
    pub const INIT_DEMO: u64 = 0x696e_6974;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a generator from a master seed and a path of stream identifiers.
pub fn derive(seed: u64, path: &[u64]) -> Rng {
    let mut h = splitmix64(seed);
    for &p in path {
        h = splitmix64(h ^ splitmix64(p.wrapping_add(0x632B_E59B_D9B4_E019)));
    }
    Rng::seed_from_u64(h)
}

/// Draw a fresh sub-seed from an existing generator.
pub fn fork(rng: &mut Rng, id: u64) -> Rng {
    use rand::RngCore;
    let base = rng.next_u64();
    derive(base, &[id])
}
