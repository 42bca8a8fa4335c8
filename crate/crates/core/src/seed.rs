//! Deterministic derivation of independent RNG streams from a master seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream tags. Keeping arrivals, policy coins and acceptance coins on
/// separate streams lets two policies share an arrival sequence.
pub const ARRIVALS: u64 = 1;
pub const POLICY: u64 = 2;
pub const ACCEPTANCE: u64 = 3;
pub const CALIBRATE_ESTIMATE: u64 = 4;
pub const CALIBRATE_ADVANCE: u64 = 5;
pub const SHARED: u64 = 6;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, index: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(index)) ^ splitmix64(stream.wrapping_mul(0xD6E8_FEB8_6659_FD93)))
}

pub fn stream_rng(master: u64, index: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, index, stream))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_differ() {
        let a = derive_seed(7, 0, ARRIVALS);
        assert_ne!(a, derive_seed(7, 0, POLICY));
        assert_ne!(a, derive_seed(7, 1, ARRIVALS));
        assert_ne!(a, derive_seed(8, 0, ARRIVALS));
        assert_eq!(a, derive_seed(7, 0, ARRIVALS));
    }
}
