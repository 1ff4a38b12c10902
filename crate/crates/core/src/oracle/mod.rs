//! Ground truth that does not go through the diagram algebra: explicit
//! enumeration, path-count oracles, distribution metrics and fixtures.

pub mod explicit;
pub mod fixtures;
pub mod metrics;

pub use explicit::{
    brute_path_count, enumerate_traces, exact_trace_distribution, path_count_matrix, ExplicitSystem, PathMatrix,
    DEFAULT_EXTRACT_CAP,
};
pub use fixtures::{
    toy_system, toy_traces, toy_weighted, markov_walk, random_circuit_aag, random_system, sat_to_system,
    walk_trace_probability, RandomSystemConfig, StatePolicy, TOY_AAG, TOY_JSON,
};
pub use metrics::{
    chi_square, frequency_of_frequencies, js_distance, js_divergence, tv_distance, uniform_frequency_histogram,
    ChiSquare, Distribution,
};
