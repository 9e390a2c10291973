//! Stable seed derivation.
//!
//! Every random stream in the crate is keyed by a 64-bit value derived from
//! the run seed and a purpose label, so streams never depend on the order in
//! which they are consumed.

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Combines a seed with an integer key.
pub fn derive(seed: u64, key: u64) -> u64 {
    mix64(seed ^ mix64(key))
}

/// Combines a seed with a purpose string (FNV-1a over the bytes).
pub fn derive_str(seed: u64, purpose: &str) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for b in purpose.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    derive(seed, h)
}
