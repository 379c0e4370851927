//! Seeded RNG plumbing. Every randomized component draws from a stream derived
//! from the master seed plus a fixed label, so each stage is independently
//! reproducible and reordering one stage never perturbs another.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// FNV-1a over the label bytes and the index; picks the ChaCha stream.
fn stream_id(label: &str, index: u64) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    for b in index.to_le_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Generator for the component named `label` (with an optional index for
/// per-trial or per-k streams), derived from the master seed.
pub fn derive_rng(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream_id(label, index));
    rng
}

/// A fresh 64-bit seed for a sub-run (e.g. one trial of a benchmark), so the
/// sub-run can itself derive labeled streams.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    derive_rng(seed, label, index).random()
}
