//! Seeded random streams.
//!
//! Every random decision in a session is drawn from a ChaCha8 stream keyed by
//! the session seed and a [`Role`]. Roles never share a stream, so turning a
//! consumer on or off (e.g. the randomizer pattern) leaves all other draws
//! untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Role {
    Pattern = 1,
    AliceChoice = 2,
    BobChoice = 3,
    Detection = 4,
    Polarization = 5,
}

/// Independent stream for `role` under `seed`.
pub fn stream(seed: u64, role: Role) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(role as u64);
    rng
}

/// Seed for the `index`-th child of `base` (SplitMix64 finalizer).
///
/// Children depend only on `(base, index)`, so appending scan points never
/// changes the seeds of existing ones.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
