//! Seed derivation. Every random choice in the toolkit flows from a master
//! seed so that runs can be replayed exactly.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere: portable and stable across platforms.
pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a. Used instead of `std::hash` because its output must not
/// change between toolchains.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// `master ⊕ hash(key)`: decorrelates per-lemma (or per-occurrence) streams
/// while keeping them a function of the master seed.
pub fn derive_seed(master: u64, key: &str) -> u64 {
    master ^ fnv1a(key.as_bytes())
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
