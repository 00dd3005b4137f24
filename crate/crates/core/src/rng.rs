//! Counter-based stream derivation.
//!
//! Every random stream is keyed by a tuple of integers (master seed,
//! replication, index, ...) hashed with SplitMix64, so any stream can be
//! reconstructed independently of the order in which others were consumed.

use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;

/// Generator behind every stream. Pinned explicitly so output does not
/// change with `rand` upgrades.
pub type StreamRng = Xoshiro256PlusPlus;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes a key path into a 64-bit seed. Order matters: `[1, 2] != [2, 1]`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().enumerate().fold(splitmix64(master), |h, (k, &w)| {
        splitmix64(h ^ splitmix64(w.wrapping_add((k as u64 + 1).wrapping_mul(GOLDEN))))
    })
}

pub fn stream_from_path(master: u64, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, path))
}

/// Stream for trajectory `index` of replication `replication`.
pub fn trajectory_stream(master: u64, replication: u64, index: u64) -> StreamRng {
    stream_from_path(master, &[replication, index])
}
