//! Substream seeds.
//!
//! A child seed is the first eight bytes (little-endian) of
//! `SHA-256("sichan/" || label || master.to_le_bytes())`. Every stage that
//! draws randomness gets its own label, so any one stage can be replayed
//! from the master seed alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub const SYMBOLS: &str = "symbols";
pub const CHANNEL: &str = "channel";
pub const NOISE: &str = "noise";

pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(b"sichan/");
    h.update(label.as_bytes());
    h.update(master.to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
