//! Seed derivation for independent, order-free random streams.
//!
//! Every stream is keyed by `(master seed, domain, a, b)`; the derived seed is
//! a fixed function of the key, so streams may be generated in any order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const DOMAIN_TRAFFIC: u64 = 0x7452_4146_4649_4321;
pub const DOMAIN_CHANNEL: u64 = 0x4348_414e_4e45_4c5f;
pub const DOMAIN_VERIFY: u64 = 0x5645_5249_4659_2121;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, domain: u64, a: u64, b: u64) -> u64 {
    mix64(mix64(mix64(master ^ domain) ^ a) ^ b.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

pub fn stream(master: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, domain, a, b))
}

/// Uniform draw in `[0, 1)` from the top 53 bits of one `u64`.
pub fn unit_f64<R: rand::RngCore>(rng: &mut R) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw (Box-Muller, one value per call).
pub fn standard_normal<R: rand::RngCore>(rng: &mut R) -> f64 {
    let u1 = 1.0 - unit_f64(rng);
    let u2 = unit_f64(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
