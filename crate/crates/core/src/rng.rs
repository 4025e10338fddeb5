//! Seed handling: one base seed, independent ChaCha substreams per walk, and
//! stable per-item seed derivation for index entries and studies.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// RNG for walk `index` under `seed`. Walks never share a stream, so the
/// result of walk `i` does not depend on how walks are scheduled.
pub fn walk_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Stable 64-bit seed derived from a base seed and a list of labels.
pub fn derive_seed(base: u64, labels: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    for l in labels {
        h.update((l.len() as u64).to_le_bytes());
        h.update(l);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
