//! Counter-based hashing RNG.
//!
//! Every random draw is a pure function of `(seed, stream, a, b)`, so results
//! do not depend on iteration order or thread scheduling.

pub const STREAM_NOISE: u64 = 0x6935_FA5C_55F6_5F1B;
pub const STREAM_BANK_INIT: u64 = 0xA24B_1C30_BEBC_CF59;
pub const STREAM_SELF_UPDATE: u64 = 0xD1B5_4A32_D192_ED03;
pub const STREAM_SELF_SLOT: u64 = 0x8CB9_2BA7_2F3D_8DD7;
pub const STREAM_NEIGHBOR_UPDATE: u64 = 0xABC9_8388_FB8F_AC03;
pub const STREAM_NEIGHBOR_PICK: u64 = 0x4F1B_BCDC_BFA5_3E0B;
pub const STREAM_NEIGHBOR_SLOT: u64 = 0x9E6C_63D0_676A_9A99;

#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Hash a `(seed, stream, a, b)` key to 64 uniformly distributed bits.
#[inline]
pub fn hash(seed: u64, stream: u64, a: u64, b: u64) -> u64 {
    let mut s = splitmix64(seed ^ stream);
    s = splitmix64(s ^ a.rotate_left(17));
    splitmix64(s ^ b.rotate_left(41))
}

/// Map hash bits to `[0, 1)` with 53 bits of precision.
#[inline]
pub fn unit(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Map hash bits to `0..n` (multiply-shift; `n` must be nonzero).
#[inline]
pub fn below(bits: u64, n: usize) -> usize {
    ((bits as u128 * n as u128) >> 64) as usize
}

/// Map hash bits to an integer in `lo..=hi`.
#[inline]
pub fn between(bits: u64, lo: i32, hi: i32) -> i32 {
    lo + below(bits, (hi - lo + 1) as usize) as i32
}

/// Standard normal draw from two keyed uniforms (Box-Muller).
pub fn standard_normal(seed: u64, stream: u64, a: u64, b: u64) -> f64 {
    let u1 = 1.0 - unit(hash(seed, stream, a, b.wrapping_mul(2)));
    let u2 = unit(hash(seed, stream, a, b.wrapping_mul(2).wrapping_add(1)));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
