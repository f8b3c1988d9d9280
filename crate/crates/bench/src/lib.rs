//! Shared fixtures for the criterion benches.

use rbn_core::{
    generate_rbn, sample_attractors, AttractorSet, BooleanNetwork, GenerationParams, SearchConfig,
};

pub fn network(n: usize, k: usize, bias: f64, seed: u64) -> BooleanNetwork {
    generate_rbn(&GenerationParams { n, k, bias, seed }).expect("valid parameters")
}

pub fn attractors(net: &BooleanNetwork, samples: usize, max_steps: u64) -> AttractorSet {
    sample_attractors(
        net,
        samples,
        &SearchConfig::new(max_steps).expect("positive budget"),
        1,
    )
    .expect("valid input")
}
