//! Seed derivation and small hashing helpers shared across the crate.
//!
//! Every random step in the toolkit is driven by a `u64` seed derived from a
//! single run seed plus a textual tag, so that reruns with the same
//! configuration reproduce identical outputs on any platform.

/// 64-bit FNV-1a over a byte slice. Stable across platforms and versions,
/// unlike `std::collections::hash_map::DefaultHasher`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Derive a sub-seed from a base seed and a tag.
///
/// Distinct tags give independent streams; the same (base, tag) pair always
/// yields the same seed.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut bytes = Vec::with_capacity(8 + tag.len());
    bytes.extend_from_slice(&base.to_le_bytes());
    bytes.extend_from_slice(tag.as_bytes());
    fnv1a64(&bytes)
}

/// Derive a sub-seed from a base seed, a tag, and an index (e.g. an epoch or
/// worker number).
pub fn derive_seed_indexed(base: u64, tag: &str, index: u64) -> u64 {
    derive_seed(base, &format!("{tag}#{index}"))
}

/// Checksum a slice of f32 values by hashing their little-endian bytes.
pub fn checksum_f32(values: impl IntoIterator<Item = f32>) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        for b in v.to_le_bytes() {
            hash ^= u64::from(b);
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    hash
}
