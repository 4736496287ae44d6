//! Fixtures shared by the benchmarks.

use vulnprop_core::{generate_ecosystem, Graph, SynthParams};

/// A matched synthetic ecosystem with about `libraries * versions / 2`
/// version nodes and a few dependencies per version.
pub fn ecosystem(libraries: usize, versions: usize, seed: u64) -> Graph {
    let params = SynthParams {
        library_count: libraries,
        max_versions_per_library: versions,
        dependency_probability: (3.0 / libraries as f64).min(1.0),
        vulnerability_count: (libraries / 80).max(3),
        fix_release_probability: 0.7,
        seed,
    };
    generate_ecosystem(&params).expect("valid benchmark parameters")
}
