//! Shared fixtures for the criterion benchmarks in `benches/`.

use loopforge_core::generate::Distribution;
use loopforge_core::{generate_instance, GenerationConfig, Instance, ReferenceProfiles};

/// Reference-configuration instance, uniform or clustered.
pub fn instance(seed: u64, n: usize, days: usize, clustered: bool) -> Instance {
    let config = GenerationConfig {
        distribution: if clustered {
            Distribution::Clustered
        } else {
            Distribution::Uniform
        },
        ..GenerationConfig::reference(seed, n, days)
    };
    generate_instance(&config, &ReferenceProfiles::synthetic(2022)).expect("reference configuration is valid")
}
