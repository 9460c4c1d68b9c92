use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Independent ChaCha streams per consumer, so the same user seed drives
/// uncorrelated draws for splitting, test sampling and shot selection.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Stream {
    Split = 1,
    TestSubset = 2,
    Shots = 3,
}

pub(crate) fn seeded(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Uniform draw in [0, 1) that depends only on `(seed, key)`.
pub(crate) fn unit_from_key(seed: u64, key: &str) -> f64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(key.as_bytes());
    let digest = hasher.finalize();
    let mut word = [0u8; 8];
    word.copy_from_slice(&digest[..8]);
    // 53 high bits give an exactly representable dyadic rational
    (u64::from_le_bytes(word) >> 11) as f64 / (1u64 << 53) as f64
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
