//! Shared fixtures for the benchmarks.

use mqtt_ids_core::pipeline::{prepare, PrepareConfig, Prepared};
use mqtt_ids_core::synth::{generate, SynthSpec};

/// Prepared synthetic data with `per_class` rows per class.
pub fn prepared(per_class: usize, seed: u64) -> Prepared {
    let spec = SynthSpec::balanced(per_class, 2.0, seed);
    let raw = generate(&spec).expect("valid synth spec");
    let cfg = PrepareConfig {
        categorical: spec.categorical.clone(),
        split_seed: seed,
        ..PrepareConfig::default()
    };
    prepare(&raw, &cfg).expect("prepare synthetic data")
}
