//! Deterministic seed derivation for independent RNG streams.
//!
//! Every random choice in the crate flows from a single master seed through
//! [`derive`], a splitmix64-style hash over the master seed and a list of
//! stream labels (replicate index, mechanism id, fixed-point epsilon, role
//! tag). Jobs that run in parallel therefore draw from streams that do not
//! depend on execution order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Role tags that keep distinct random streams from colliding.
pub mod tag {
    pub const DATA: u64 = 0x01;
    pub const FIT: u64 = 0x02;
    pub const SYNTH: u64 = 0x03;
    pub const CHAIN: u64 = 0x04;
    pub const RETRY: u64 = 0x05;
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash a master seed together with stream labels into a new 64-bit seed.
pub fn derive(master: u64, parts: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &p in parts {
        state = splitmix64(state ^ splitmix64(p));
    }
    state
}

/// Epsilon as a fixed-point integer label (micro-units), so that seed
/// derivation does not depend on float formatting.
pub fn epsilon_label(epsilon: f64) -> u64 {
    (epsilon * 1e6).round() as i64 as u64
}

/// Seeded RNG with a stable, version-independent stream.
pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_is_stable_and_label_sensitive() {
        let a = derive(42, &[1, 2, 3]);
        let b = derive(42, &[1, 2, 3]);
        assert_eq!(a, b);
        assert_ne!(a, derive(42, &[1, 2, 4]));
        assert_ne!(a, derive(42, &[1, 3, 2]));
        assert_ne!(a, derive(43, &[1, 2, 3]));
    }

    #[test]
    fn epsilon_labels_distinguish_close_targets() {
        assert_ne!(epsilon_label(3.0), epsilon_label(3.000001));
        assert_eq!(epsilon_label(5.0), epsilon_label(5.0 + 1e-12));
    }
}
