//! Deterministic RNG stream derivation.
//!
//! Every stochastic component draws from a `ChaCha8Rng` seeded from a hash of
//! a master seed and a textual stream identity, so results never depend on
//! thread scheduling or on the order in which streams are created.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Derives a 64-bit seed from a master seed and a list of identity parts.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(master.to_le_bytes());
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn stream(master: u64, parts: &[&str]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, parts))
}

/// Child stream for item `index` of a parallel loop.
pub fn indexed(base: u64, index: usize) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(base, &[&index.to_string()]))
}
