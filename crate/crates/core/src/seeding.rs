//! Deterministic seed derivation.
//!
//! Every random choice in a clip comes from a ChaCha stream keyed by a
//! SHA-256 digest of the choice's identity, so outputs never depend on
//! iteration order or on which other clips are in the batch.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::metadata::ClassId;

fn digest(parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let mut out = [0u8; 32];
    out.copy_from_slice(&h.finalize());
    out
}

/// Mixes the batch seed with a clip's file stem.
pub fn clip_seed(batch_seed: u64, clip_stem: &str) -> u64 {
    let d = digest(&[b"clip", &batch_seed.to_le_bytes(), clip_stem.as_bytes()]);
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

/// Generator for the tile of the `ordinal`-th track of `(class, source)`.
pub fn track_rng(clip_seed: u64, class: ClassId, source: u32, ordinal: u32) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(digest(&[
        b"track",
        &clip_seed.to_le_bytes(),
        &[class.index() as u8],
        &source.to_le_bytes(),
        &ordinal.to_le_bytes(),
    ]))
}

pub fn background_rng(clip_seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::from_seed(digest(&[b"background", &clip_seed.to_le_bytes()]))
}
