//! Deterministic seed derivation for ensemble runs.
//!
//! All mixing uses the SplitMix64 finalizer, which is a bijection on `u64`:
//!
//! ```text
//! network_seed  = mix(root + mix((bias_index << 32) | network_index))
//! sampling_seed = mix(network_seed ^ 0x5A4D_504C_494E_4753)
//! ```
//!
//! For indices below `2^32` the network seed is injective in
//! `(bias_index, network_index)` for a fixed root.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const SAMPLING_TAG: u64 = 0x5A4D_504C_494E_4753;

/// SplitMix64 output function applied to `x + gamma`.
pub fn mix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GOLDEN_GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn network_seed(root: u64, bias_index: u32, network_index: u32) -> u64 {
    let packed = ((bias_index as u64) << 32) | network_index as u64;
    mix64(root.wrapping_add(mix64(packed)))
}

/// Seed for drawing a network's initial states, kept separate from the
/// stream that generated its topology.
pub fn sampling_seed(network_seed: u64) -> u64 {
    mix64(network_seed ^ SAMPLING_TAG)
}
