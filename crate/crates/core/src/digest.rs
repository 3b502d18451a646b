//! Stable hashing helpers. Everything here must give the same answer on
//! every platform and every run.

use sha2::{Digest, Sha256};

/// 64-bit hash of a sequence of strings: the first eight bytes (big-endian)
/// of SHA-256 over the length-prefixed parts.
pub fn hash64(parts: &[&str]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_be_bytes());
        h.update(p.as_bytes());
    }
    let out = h.finalize();
    u64::from_be_bytes(out[..8].try_into().expect("sha256 is 32 bytes"))
}

/// Lowercase hex SHA-256 of `bytes`, prefixed `sha256:`.
pub fn content_digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}
