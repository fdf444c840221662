//! Deterministic seed splitting.
//!
//! Every random stream in the pipeline is keyed by a path of integers below a
//! master seed (for example `[size, index]` for an instance, or
//! `[gauge, read]` for a single anneal). Derivation uses the SplitMix64
//! finaliser, so seeds are identical across runs, platforms and thread
//! schedules.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 output function.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a path of stream labels.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter()
        .fold(mix64(master), |acc, &label| mix64(acc ^ mix64(label)))
}

/// Portable RNG used throughout the crate.
pub type Rng = ChaCha8Rng;

pub fn rng_from(master: u64, path: &[u64]) -> Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, path))
}

/// Stream labels keep unrelated streams from colliding when their numeric
/// paths happen to coincide.
pub mod stream {
    pub const INSTANCE: u64 = 0x494E_5354;
    pub const GAUGE: u64 = 0x4741_5547;
    pub const READ: u64 = 0x5245_4144;
    pub const DEFECTS: u64 = 0x4445_4645;
    pub const EMBED: u64 = 0x454D_4244;
    pub const CELL: u64 = 0x4345_4C4C;
    pub const BOOTSTRAP: u64 = 0x424F_4F54;
    pub const CHAIN_BREAK: u64 = 0x4252_4B31;
}
