use sha2::{Digest, Sha256};

/// Stable 64-bit hash of a sequence of byte strings.
///
/// Each part is length-prefixed so `["ab", "c"]` and `["a", "bc"]` differ.
pub(crate) fn stable_u64(parts: &[&[u8]]) -> u64 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part);
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Maps a hash to a uniform float in `[0, 1)`.
pub(crate) fn unit_interval(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}
