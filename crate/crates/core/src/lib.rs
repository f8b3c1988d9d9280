//! Random Boolean Network toolkit: network generation and synchronous
//! dynamics, attractor sampling, attractor distances, clustering analyses and
//! ensemble statistics.
//!
//! ```
//! use rbn_core::{generate_rbn, sample_attractors, distance_matrix, GenerationParams, Measure, SearchConfig};
//!
//! let net = generate_rbn(&GenerationParams { n: 20, k: 3, bias: 0.85, seed: 1 }).unwrap();
//! let set = sample_attractors(&net, 200, &SearchConfig::new(10_000).unwrap(), 2).unwrap();
//! let d = distance_matrix(&set, Measure::MinHamming);
//! assert_eq!(d.len(), set.len());
//! ```

pub mod attractor;
pub mod cluster;
pub mod distance;
pub mod error;
pub mod experiment;
pub mod network;
pub mod seed;
pub mod stats;

pub use attractor::{
    attractors_from_initials, canonicalize, exhaustive_attractors, find_attractor,
    sample_attractors, Attractor, AttractorSet, SearchConfig,
};
pub use cluster::{
    clustering_report, network_clustering_coefficient, node_clustering_coefficient,
    single_link_dendrogram, weights_from_distances, ClusteringReport, Dendrogram, Merge,
    WeightedAdjacency,
};
pub use distance::{
    activation_vector, distance_matrix, euclidean, hamming, min_hamming, pseudo_hamming,
    ActivationVector, DistanceMatrix, Fraction, Measure,
};
pub use error::{Error, Result};
pub use experiment::{
    run_experiment, run_experiment_with_workers, ExperimentConfig, RunManifest, RunReport,
};
pub use network::{
    critical_bias, generate_rbn, BooleanNetwork, GenerationParams, NetworkState, NodeFunction,
    Origin,
};
pub use stats::{clustering_histogram, pool_distances, summary, Histogram, SummaryStats};
