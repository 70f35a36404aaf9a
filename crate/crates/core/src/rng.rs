//! Deterministic counter-based random numbers.
//!
//! Every random quantity in the crate is a pure function of a 64-bit seed
//! and a counter: a site index, a lattice coordinate vector, or a
//! realization number. There is no mutable generator state, so parallel
//! workers may evaluate any subset of counters in any order and always
//! reproduce the same values, and a single altered site does not shift the
//! draws of its neighbours.
//!
//! The mixing function is the SplitMix64 finalizer (Steele, Lea and
//! Flood's `splitmix64`, also the seeding scheme of the xoshiro family).
//! `stream_value(seed, i)` reproduces exactly the i-th output of the
//! reference SplitMix64 generator started from `seed`.

/// Odd increment of the SplitMix64 Weyl sequence (2^64 / golden ratio).
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// Domain-separation salts (leading hex digits of pi), so realization
/// seeds, coordinate draws and plain stream draws never collide.
const REALIZATION_SALT: u64 = 0x243F_6A88_85A3_08D3;
const COORDINATE_SALT: u64 = 0x1319_8A2E_0370_7344;

/// SplitMix64 finalizer: a bijective avalanche mix on 64 bits.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `index`-th output of SplitMix64 seeded with `seed`.
#[inline]
pub fn stream_value(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// Independent seed for one realization of an ensemble.
///
/// Realization draws must not collide with site draws of the base seed,
/// so the base is first avalanched before indexing.
#[inline]
pub fn realization_seed(base_seed: u64, realization: u64) -> u64 {
    stream_value(mix64(base_seed ^ REALIZATION_SALT), realization)
}

/// Map signed lattice coordinates to u64 counters (zigzag code).
#[inline]
pub fn zigzag(c: i64) -> u64 {
    ((c << 1) ^ (c >> 63)) as u64
}

/// Draw attached to an absolute lattice coordinate.
///
/// Keying by coordinate rather than by box-local site index makes nested
/// boxes consistent: the configuration a box sees is literally the
/// restriction of the configuration any larger box sees.
#[inline]
pub fn coordinate_value(seed: u64, coords: &[i64]) -> u64 {
    let mut h = mix64(seed ^ COORDINATE_SALT);
    for &c in coords {
        h = mix64(h ^ zigzag(c));
    }
    h
}

/// Uniform f64 in [0, 1) from 53 high bits.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

/// Uniform f64 in [low, high].
#[inline]
pub fn uniform_f64(bits: u64, low: f64, high: f64) -> f64 {
    low + (high - low) * unit_f64(bits)
}
