//! Seeded synthetic ecosystems and brute-force oracles.
//!
//! Generated ecosystems are acyclic at the library level: a library only
//! depends on libraries created before it. The oracles below use their own
//! adjacency lists and exhaustive depth-first search so they can be used to
//! cross-check the analyzers.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{build_graph, BuildInput, Graph, GraphError, ManifestSource, NodeId};
use crate::ingest::{
    Constraint, LibraryMeta, Requirement, RequirementSet, ResolvedEntry, ResolvedManifest, SourceKind,
};
use crate::matcher::match_vulnerabilities;
use crate::model::{LibraryId, Severity};
use crate::propagation::DependencyChain;
use crate::upgrade::FixMode;
use crate::version::{Version, VersionRange};
use crate::vuln::{Affected, Reference, VulnRecord};

/// Oracles refuse graphs with more real libraries than this.
pub const ORACLE_MAX_LIBRARIES: usize = 50;

const LANGUAGES: [&str; 4] = ["Swift", "Objective-C", "C", "C++"];
const START_TIME: i64 = 1_400_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("graph has {0} libraries; oracles handle at most {ORACLE_MAX_LIBRARIES}")]
    GraphTooLarge(usize),
    #[error("unknown version {0:?}")]
    UnknownNode(NodeId),
    #[error(transparent)]
    Graph(Box<GraphError>),
}

impl From<GraphError> for SynthError {
    fn from(e: GraphError) -> Self {
        SynthError::Graph(Box::new(e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthParams {
    pub library_count: usize,
    pub max_versions_per_library: usize,
    /// Chance that a library depends on any given earlier library.
    pub dependency_probability: f64,
    pub vulnerability_count: usize,
    /// Chance that a vulnerability's range is closed by a later release.
    pub fix_release_probability: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            library_count: 30,
            max_versions_per_library: 6,
            dependency_probability: 0.1,
            vulnerability_count: 5,
            fix_release_probability: 0.7,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<(), SynthError> {
        for (name, p) in [
            ("dependency_probability", self.dependency_probability),
            ("fix_release_probability", self.fix_release_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SynthError::InvalidParams(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        if self.library_count > 0 && self.max_versions_per_library == 0 {
            return Err(SynthError::InvalidParams(
                "max_versions_per_library must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Everything needed to build and match a synthetic ecosystem.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub inputs: Vec<BuildInput>,
    pub metadata: Vec<LibraryMeta>,
    pub vulns: Vec<VulnRecord>,
}

struct SynthVersion {
    version: Version,
    released: i64,
}

fn library_id(i: usize) -> LibraryId {
    LibraryId::new(&format!("synth/lib{i:05}")).expect("valid synthetic id")
}

fn next_version(rng: &mut ChaCha8Rng, existing: &[SynthVersion]) -> Version {
    let Some(latest) = existing.iter().map(|v| &v.version).max() else {
        return Version::new(rng.random_range(0..2), rng.random_range(0..5), 0);
    };
    // occasionally patch an older line, so version order and release order differ
    if existing.len() >= 2 && rng.random_bool(0.1) {
        let base = &existing[rng.random_range(0..existing.len() - 1)].version;
        let candidate = Version::new(base.major, base.minor, base.patch + 1);
        if !existing.iter().any(|v| v.version == candidate) {
            return candidate;
        }
    }
    match rng.random_range(0..10) {
        0 => Version::new(latest.major + 1, 0, 0),
        1..=4 => Version::new(latest.major, latest.minor + 1, 0),
        _ => Version::new(latest.major, latest.minor, latest.patch + 1),
    }
}

/// Draws the library versions, dependencies and vulnerabilities.
pub fn generate_corpus(params: &SynthParams) -> Result<SynthCorpus, SynthError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = params.library_count;

    let mut versions: Vec<Vec<SynthVersion>> = Vec::with_capacity(n);
    let mut last_first_release = START_TIME;
    let mut inputs = Vec::new();
    let mut metadata = Vec::with_capacity(n);

    for i in 0..n {
        let id = library_id(i);
        metadata.push(LibraryMeta {
            library: id.clone(),
            language: LANGUAGES[rng.random_range(0..LANGUAGES.len())].to_string(),
            repository_url: None,
        });

        let dep_count = if i == 0 || params.dependency_probability == 0.0 {
            0
        } else {
            Binomial::new(i as u64, params.dependency_probability)
                .expect("probability validated")
                .sample(&mut rng) as usize
        };
        let mut dep_libs: Vec<usize> = index::sample(&mut rng, i, dep_count).into_vec();
        dep_libs.sort_unstable();

        let count = rng.random_range(1..=params.max_versions_per_library);
        let mut mine: Vec<SynthVersion> = Vec::with_capacity(count);
        // first releases follow creation order
        let mut clock = last_first_release + rng.random_range(1..=10);
        last_first_release = clock;
        for k in 0..count {
            if k > 0 {
                clock += rng.random_range(1..=1000);
            }
            let version = next_version(&mut rng, &mine);
            let from_manifest = !dep_libs.is_empty() && rng.random_bool(0.1);

            let mut entries = Vec::new();
            let mut requirements = Vec::new();
            for &d in &dep_libs {
                if rng.random_bool(0.1) {
                    continue;
                }
                // creation order guarantees the first version of `d` is older
                let eligible: Vec<&SynthVersion> = versions[d].iter().filter(|v| v.released < clock).collect();
                let pick = if rng.random_bool(0.6) {
                    eligible
                        .iter()
                        .max_by_key(|v| v.released)
                        .expect("dependency has an older version")
                } else {
                    eligible[rng.random_range(0..eligible.len())]
                };
                if from_manifest {
                    let constraint = if rng.random_bool(0.5) {
                        Constraint::at_least_zero()
                    } else {
                        Constraint::optimistic(pick.version.clone())
                    };
                    requirements.push(Requirement {
                        library: library_id(d),
                        constraint,
                    });
                } else {
                    entries.push(ResolvedEntry {
                        library: library_id(d),
                        version: pick.version.clone(),
                        deps: vec![],
                    });
                }
            }
            if !from_manifest && rng.random_bool(0.05) {
                entries.push(ResolvedEntry {
                    library: LibraryId::new(&format!("external/pod{}", rng.random_range(0..20))).expect("valid id"),
                    version: Version::new(1, 0, 0),
                    deps: vec![],
                });
            }
            let source = if from_manifest {
                ManifestSource::Requirements(RequirementSet {
                    source_kind: SourceKind::Podfile,
                    requirements,
                })
            } else {
                ManifestSource::Resolved(ResolvedManifest {
                    source_kind: SourceKind::CocoapodsLock,
                    entries,
                })
            };
            inputs.push(BuildInput::new(id.clone(), version.clone(), clock, source));
            mine.push(SynthVersion {
                version,
                released: clock,
            });
        }
        versions.push(mine);
    }

    let mut vulns = Vec::with_capacity(params.vulnerability_count);
    if n > 0 {
        for k in 0..params.vulnerability_count {
            let lib = rng.random_range(0..n);
            let mut sorted: Vec<&SynthVersion> = versions[lib].iter().collect();
            sorted.sort_by(|a, b| a.version.cmp(&b.version));
            let start = rng.random_range(0..sorted.len());
            let (ranges, exact_versions) = if rng.random_bool(0.1) {
                (vec![], vec![sorted[start].version.clone()])
            } else if start + 1 < sorted.len() && rng.random_bool(params.fix_release_probability) {
                let end = rng.random_range(start + 1..sorted.len());
                (
                    vec![VersionRange::half_open(
                        sorted[start].version.clone(),
                        sorted[end].version.clone(),
                    )],
                    vec![],
                )
            } else {
                (vec![VersionRange::at_least(sorted[start].version.clone())], vec![])
            };
            let severity = Severity::SCORED[rng.random_range(0..Severity::SCORED.len())];
            let description = match rng.random_range(0..4) {
                0 => format!("Buffer overflow in parse_header() in src/header{k}.c."),
                1 => format!("The SessionManager class mishandles token {k}."),
                2 => format!("Remote attackers can trigger issue {k} via crafted input."),
                _ => format!("Use-after-free in Decoder.finish in Decoder{k}.swift."),
            };
            let references = if rng.random_bool(0.5) {
                vec![Reference {
                    url: format!(
                        "https://github.com/{}/commit/{:040x}",
                        library_id(lib),
                        k as u128 + 0xabc
                    ),
                    tags: vec!["Patch".into()],
                }]
            } else {
                vec![]
            };
            vulns.push(VulnRecord {
                id: format!("SYN-{}-{k:04}", params.seed),
                description,
                severity,
                published: sorted[start].released + 86_400,
                references,
                affected: vec![Affected {
                    library: library_id(lib),
                    ranges,
                    exact_versions,
                }],
            });
        }
    }

    Ok(SynthCorpus {
        inputs,
        metadata,
        vulns,
    })
}

/// Builds and matches a seeded synthetic ecosystem.
pub fn generate_ecosystem(params: &SynthParams) -> Result<Graph, SynthError> {
    let corpus = generate_corpus(params)?;
    let built = build_graph(corpus.inputs, &corpus.metadata)?;
    Ok(match_vulnerabilities(&built.graph, &corpus.vulns).graph)
}

/// Stand-alone adjacency used by the oracles.
struct OracleView {
    succ: Vec<Vec<usize>>,
    vulns: Vec<BTreeSet<String>>,
}

impl OracleView {
    fn new(graph: &Graph) -> Result<Self, SynthError> {
        let libraries = graph.real_libraries().count();
        if libraries > ORACLE_MAX_LIBRARIES {
            return Err(SynthError::GraphTooLarge(libraries));
        }
        let mut succ = Vec::with_capacity(graph.node_count());
        let mut vulns = Vec::with_capacity(graph.node_count());
        for (id, node) in graph.nodes() {
            succ.push(node.deps.iter().map(|d| d.target.index()).collect());
            vulns.push(graph.vulns_at(id).cloned().unwrap_or_default());
        }
        Ok(OracleView { succ, vulns })
    }

    /// Enumerates every simple path from `at`, recording the shortest
    /// length at which each vulnerable node is reached.
    fn enumerate(&self, at: usize, depth: u32, on_path: &mut Vec<bool>, best: &mut BTreeMap<usize, u32>) {
        if !self.vulns[at].is_empty() {
            let e = best.entry(at).or_insert(depth);
            *e = (*e).min(depth);
        }
        for &next in &self.succ[at] {
            if !on_path[next] {
                on_path[next] = true;
                self.enumerate(next, depth + 1, on_path, best);
                on_path[next] = false;
            }
        }
    }

    fn reaches(&self, at: usize, seen: &mut Vec<bool>, hit: &dyn Fn(usize) -> bool) -> bool {
        if hit(at) {
            return true;
        }
        seen[at] = true;
        for &next in &self.succ[at] {
            if !seen[next] && self.reaches(next, seen, hit) {
                return true;
            }
        }
        false
    }
}

/// Minimum length over all simple dependency paths from `root` to a
/// vulnerable version, for every vulnerable version reachable from `root`.
pub fn oracle_distances(graph: &Graph, root: NodeId) -> Result<BTreeMap<NodeId, u32>, SynthError> {
    let view = OracleView::new(graph)?;
    if root.index() >= view.succ.len() {
        return Err(SynthError::UnknownNode(root));
    }
    let mut on_path = vec![false; view.succ.len()];
    on_path[root.index()] = true;
    let mut best = BTreeMap::new();
    view.enumerate(root.index(), 0, &mut on_path, &mut best);
    Ok(best.into_iter().map(|(n, d)| (NodeId(n as u32), d)).collect())
}

/// Exhaustive counterpart of the breadth-first shortest distance.
pub fn oracle_shortest(graph: &Graph, root: NodeId) -> Result<Option<u32>, SynthError> {
    Ok(oracle_distances(graph, root)?.into_values().min())
}

/// Exhaustive counterpart of the upgrade check: tries every strictly newer
/// version of the direct dependency released strictly before the root.
pub fn oracle_fixable(graph: &Graph, chain: &DependencyChain, mode: FixMode) -> Result<bool, SynthError> {
    let view = OracleView::new(graph)?;
    if chain.nodes.len() < 2 {
        return Ok(false);
    }
    let root = graph.node(chain.nodes[0]);
    let direct = graph.node(chain.nodes[1]);
    let target = chain.nodes[chain.nodes.len() - 1].index();
    let vuln = chain.vuln_id.as_str();
    for (id, candidate) in graph.nodes() {
        if candidate.library != direct.library
            || candidate.stub
            || candidate.version <= direct.version
            || candidate.released >= root.released
        {
            continue;
        }
        let c = id.index();
        if chain.nodes.len() == 2 && view.vulns[c].contains(vuln) {
            continue;
        }
        let mut seen = vec![false; view.succ.len()];
        let still_vulnerable = match mode {
            FixMode::StrictVersion => view.reaches(c, &mut seen, &|n| n == target),
            FixMode::VulnAware => view.reaches(c, &mut seen, &|n| view.vulns[n].contains(vuln)),
        };
        if !still_vulnerable {
            return Ok(true);
        }
    }
    Ok(false)
}
