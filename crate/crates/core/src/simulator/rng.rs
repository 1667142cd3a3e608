//! Seed derivation.
//!
//! Every random stream is a `ChaCha8Rng` seeded through
//! `SeedableRng::seed_from_u64` with a 64-bit key:
//!
//! * arrivals of an ISP: `mix(mix(seed ^ ARRIVAL_TAG) ^ asn)`
//! * the n-th test of an ISP: `mix(mix(mix(seed ^ MEASUREMENT_TAG) ^ asn) ^ n)`
//!
//! where `mix` is the SplitMix64 finalizer. Streams are therefore
//! independent of how many ISPs a scenario holds and of generation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ARRIVAL_TAG: u64 = 0x6172_7269_7661_6c73;
const MEASUREMENT_TAG: u64 = 0x6d65_6173_7572_6573;

pub fn mix(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn arrival_rng(seed: u64, client_asn: u32) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(seed ^ ARRIVAL_TAG) ^ client_asn as u64))
}

pub fn measurement_rng(seed: u64, client_asn: u32, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(mix(seed ^ MEASUREMENT_TAG) ^ client_asn as u64) ^ index))
}
