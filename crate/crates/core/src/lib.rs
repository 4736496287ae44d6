//! Temporal library dependency graphs for the CocoaPods, Carthage and
//! Swift PM ecosystems, with vulnerability propagation, upgrade-fixability
//! and information-precision analyses.
//!
//! The usual pipeline is: parse resolution files and manifests
//! ([`ingest`]), assemble a [`Graph`] with [`build_graph`], attach
//! vulnerabilities with [`match_vulnerabilities`], then run the analyses in
//! [`propagation`], [`upgrade`] and [`precision`].

pub mod diagnostics;
pub mod graph;
pub mod ingest;
pub mod matcher;
pub mod model;
pub mod precision;
pub mod propagation;
pub mod synth;
pub mod upgrade;
pub mod version;
pub mod vuln;

pub use diagnostics::{Parsed, Warning, WarningKind};
pub use graph::{
    build_graph, connected_libraries, latest_version, load_graph, resolve_requirement, save_graph, BuildInput,
    BuildOutcome, Dep, Graph, GraphError, Library, LibraryVersionNode, ManifestSource, NodeId, NodeSpec,
};
pub use ingest::{Constraint, ConstraintKind, IngestError, RequirementSet, ResolvedManifest, SourceKind};
pub use matcher::{match_vulnerabilities, MatchOutcome, VulnMatch};
pub use model::{LibraryId, PackageManager, Provenance, Severity, VersionRef};
pub use precision::{precision_report, scan_vulnerability, PatternSet, PrecisionFlags, PrecisionRow};
pub use propagation::{
    ecosystem_stats, library_shortest_level, propagation_histogram, shortest_vuln_distance, DependencyChain,
    EcosystemStats, HistogramMode, LevelCounting, PropagationReport, Stratify,
};
pub use synth::{generate_ecosystem, oracle_fixable, oracle_shortest, SynthError, SynthParams};
pub use upgrade::{
    chain_fixable_by_upgrade, enumerate_vulnerable_chains, fixability_report, per_vuln_fix_rate_quartiles, FixMode,
    FixReason, FixResult, FixabilityReport, Grouping, Scope, UpgradeError,
};
pub use version::{compare_versions, parse_version, version_in_range, Version, VersionRange};
pub use vuln::{Affected, Reference, VulnRecord};
