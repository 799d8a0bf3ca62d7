//! Seed derivation. Every random stream in the harness is keyed by a digest
//! of its logical coordinates, so execution order never changes outcomes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::canonical::Digest;

/// `sha256(master ‖ 0x00 ‖ part₀ ‖ 0x00 ‖ part₁ …)` truncated to 64 bits.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut buf = master.to_be_bytes().to_vec();
    for p in parts {
        buf.push(0);
        buf.extend_from_slice(p.as_bytes());
    }
    Digest::of(&buf).prefix_u64()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn derived_rng(master: u64, parts: &[&str]) -> ChaCha8Rng {
    rng(derive_seed(master, parts))
}
