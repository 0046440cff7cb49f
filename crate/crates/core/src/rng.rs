//! Seeded random streams and stable seed derivation.
//!
//! Every stochastic draw in the harness goes through [`SimRng`], a
//! xoshiro256++ generator seeded via splitmix64. Uniform and normal variates
//! are built here from raw `u64` output so the streams are reproducible from
//! the generator definition alone, independent of any distribution crate.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

#[derive(Clone, Debug)]
pub struct SimRng(Xoshiro256PlusPlus);

impl SimRng {
    pub fn seed_from_u64(seed: u64) -> Self {
        SimRng(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller; always consumes exactly two uniforms.
    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Uniform integer in `[0, n)`. `n` must be nonzero.
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        // Multiply-shift keeps the draw count fixed at one per call.
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

/// Final avalanche step of splitmix64.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable seed derivation from a master seed and labelled parts.
///
/// Uses FNV-1a over the parts (each terminated by a 0xff byte so that
/// `["ab", "c"]` and `["a", "bc"]` differ) followed by a splitmix finalizer.
/// The result does not depend on the platform or the Rust version.
pub fn derive_seed(master: u64, parts: &[&str]) -> u64 {
    let mut h = FNV_OFFSET ^ mix64(master);
    for part in parts {
        for b in part.bytes().chain(std::iter::once(0xff)) {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    mix64(h)
}
