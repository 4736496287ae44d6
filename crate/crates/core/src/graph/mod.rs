//! The immutable, temporal library-version dependency graph.
//!
//! Nodes are library versions with release timestamps; edges are exact
//! version-to-version dependencies tagged with their provenance. Node ids
//! are dense indices assigned in `(library, version)` order, so two graphs
//! with the same content have the same ids.

mod build;
mod persist;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LibraryId, PackageManager, Provenance, VersionRef};
use crate::version::Version;
use crate::vuln::VulnRecord;

pub use build::{build_graph, resolve_requirement, BuildInput, BuildOutcome, ManifestSource};
pub use persist::{load_graph, save_graph};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("duplicate version {0} with conflicting content")]
    DuplicateVersion(VersionRef),
    #[error("{0} has a non-positive release timestamp")]
    InvalidRelease(VersionRef),
    /// `(from, to)`.
    #[error("dependency {} -> {} points at a missing version", .0.0, .0.1)]
    DanglingEdge(Box<(VersionRef, VersionRef)>),
    #[error("unknown version {0}")]
    UnknownVersion(VersionRef),
    #[error("match references unknown vulnerability {0}")]
    UnknownVuln(String),
    #[error("library {0} has no released versions")]
    NoVersions(LibraryId),
    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
    #[error("conflicting duplicate record at line {line}: {key}")]
    VersionConflict { line: usize, key: String },
    #[error("i/o error: {0}")]
    Io(String),
}

/// Libraries, version specs, vulnerability records and matches, as taken
/// by [`Graph::from_parts`].
pub type GraphParts = (Vec<Library>, Vec<NodeSpec>, Vec<VulnRecord>, Vec<(VersionRef, String)>);

/// Dense index of a version node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Library {
    pub id: LibraryId,
    /// `None` when the language is unknown.
    pub language: Option<String>,
    pub package_managers: BTreeSet<PackageManager>,
}

impl Library {
    pub fn new(id: LibraryId) -> Self {
        Library {
            id,
            language: None,
            package_managers: BTreeSet::new(),
        }
    }

    pub fn language_or_unknown(&self) -> &str {
        self.language.as_deref().unwrap_or("UNKNOWN")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dep {
    pub target: NodeId,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LibraryVersionNode {
    pub library: LibraryId,
    pub version: Version,
    /// Release time in UTC seconds; 0 for stubs.
    pub released: i64,
    /// Placeholder for a dependency target that was never ingested.
    pub stub: bool,
    pub deps: Vec<Dep>,
}

impl LibraryVersionNode {
    pub fn key(&self) -> VersionRef {
        VersionRef::new(self.library.clone(), self.version.clone())
    }
}

/// Node description used to assemble a graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub library: LibraryId,
    pub version: Version,
    pub released: i64,
    pub stub: bool,
    pub deps: Vec<(VersionRef, Provenance)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    libraries: BTreeMap<LibraryId, Library>,
    nodes: Vec<LibraryVersionNode>,
    index: HashMap<VersionRef, NodeId>,
    by_library: BTreeMap<LibraryId, Vec<NodeId>>,
    reverse: Vec<Vec<NodeId>>,
    vuln_matches: BTreeMap<NodeId, BTreeSet<String>>,
    vulns: BTreeMap<String, VulnRecord>,
}

impl Default for Graph {
    fn default() -> Self {
        Graph::empty()
    }
}

impl Graph {
    pub fn empty() -> Self {
        Graph {
            libraries: BTreeMap::new(),
            nodes: Vec::new(),
            index: HashMap::new(),
            by_library: BTreeMap::new(),
            reverse: Vec::new(),
            vuln_matches: BTreeMap::new(),
            vulns: BTreeMap::new(),
        }
    }

    /// Assembles and validates a graph.
    ///
    /// Libraries referenced by nodes but missing from `libraries` are added
    /// with unknown language. Repeated edges to the same target keep the
    /// first provenance.
    pub fn from_parts(
        libraries: Vec<Library>,
        mut specs: Vec<NodeSpec>,
        vulns: Vec<VulnRecord>,
        matches: Vec<(VersionRef, String)>,
    ) -> Result<Graph, GraphError> {
        specs.sort_by(|a, b| (&a.library, &a.version).cmp(&(&b.library, &b.version)));
        let mut index = HashMap::with_capacity(specs.len());
        for (i, spec) in specs.iter().enumerate() {
            let key = VersionRef::new(spec.library.clone(), spec.version.clone());
            if !spec.stub && spec.released <= 0 {
                return Err(GraphError::InvalidRelease(key));
            }
            if index.insert(key.clone(), NodeId(i as u32)).is_some() {
                return Err(GraphError::DuplicateVersion(key));
            }
        }

        let mut lib_map: BTreeMap<LibraryId, Library> = libraries.into_iter().map(|l| (l.id.clone(), l)).collect();
        let mut by_library: BTreeMap<LibraryId, Vec<NodeId>> = BTreeMap::new();
        let mut nodes = Vec::with_capacity(specs.len());
        let mut reverse = vec![Vec::new(); specs.len()];
        for (i, spec) in specs.into_iter().enumerate() {
            let id = NodeId(i as u32);
            let mut deps: Vec<Dep> = Vec::with_capacity(spec.deps.len());
            for (to, provenance) in spec.deps {
                let target = *index.get(&to).ok_or_else(|| {
                    GraphError::DanglingEdge(Box::new((
                        VersionRef::new(spec.library.clone(), spec.version.clone()),
                        to.clone(),
                    )))
                })?;
                if !deps.iter().any(|d| d.target == target) {
                    deps.push(Dep { target, provenance });
                }
            }
            deps.sort_by_key(|d| d.target);
            for d in &deps {
                reverse[d.target.index()].push(id);
            }
            lib_map
                .entry(spec.library.clone())
                .or_insert_with(|| Library::new(spec.library.clone()));
            by_library.entry(spec.library.clone()).or_default().push(id);
            nodes.push(LibraryVersionNode {
                library: spec.library,
                version: spec.version,
                released: spec.released,
                stub: spec.stub,
                deps,
            });
        }
        for preds in &mut reverse {
            preds.sort();
            preds.dedup();
        }

        let vulns: BTreeMap<String, VulnRecord> = vulns.into_iter().map(|v| (v.id.clone(), v)).collect();
        let mut vuln_matches: BTreeMap<NodeId, BTreeSet<String>> = BTreeMap::new();
        for (key, vuln_id) in matches {
            let node = *index.get(&key).ok_or(GraphError::UnknownVersion(key))?;
            if !vulns.contains_key(&vuln_id) {
                return Err(GraphError::UnknownVuln(vuln_id));
            }
            vuln_matches.entry(node).or_default().insert(vuln_id);
        }

        Ok(Graph {
            libraries: lib_map,
            nodes,
            index,
            by_library,
            reverse,
            vuln_matches,
            vulns,
        })
    }

    /// Decomposes the graph into the parts accepted by [`Graph::from_parts`].
    pub fn to_parts(&self) -> GraphParts {
        let specs = self
            .nodes
            .iter()
            .map(|n| NodeSpec {
                library: n.library.clone(),
                version: n.version.clone(),
                released: n.released,
                stub: n.stub,
                deps: n
                    .deps
                    .iter()
                    .map(|d| (self.node(d.target).key(), d.provenance))
                    .collect(),
            })
            .collect();
        let matches = self
            .vuln_matches
            .iter()
            .flat_map(|(id, vs)| vs.iter().map(move |v| (self.node(*id).key(), v.clone())))
            .collect();
        (
            self.libraries.values().cloned().collect(),
            specs,
            self.vulns.values().cloned().collect(),
            matches,
        )
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.nodes.iter().map(|n| n.deps.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty() && self.libraries.is_empty()
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &LibraryVersionNode {
        &self.nodes[id.index()]
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &LibraryVersionNode)> + '_ {
        self.nodes.iter().enumerate().map(|(i, n)| (NodeId(i as u32), n))
    }

    pub fn find(&self, library: &LibraryId, version: &Version) -> Option<NodeId> {
        self.index
            .get(&VersionRef::new(library.clone(), version.clone()))
            .copied()
    }

    pub fn find_ref(&self, key: &VersionRef) -> Option<NodeId> {
        self.index.get(key).copied()
    }

    /// Versions of a library in ascending version order.
    pub fn versions_of(&self, library: &LibraryId) -> &[NodeId] {
        self.by_library.get(library).map_or(&[], Vec::as_slice)
    }

    pub fn library(&self, id: &LibraryId) -> Option<&Library> {
        self.libraries.get(id)
    }

    pub fn libraries(&self) -> impl Iterator<Item = &Library> + '_ {
        self.libraries.values()
    }

    /// A library is a stub library when it has no ingested versions.
    pub fn is_stub_library(&self, id: &LibraryId) -> bool {
        self.versions_of(id).iter().all(|&n| self.node(n).stub)
    }

    /// Libraries with at least one non-stub version.
    pub fn real_libraries(&self) -> impl Iterator<Item = &Library> + '_ {
        self.libraries.values().filter(move |l| !self.is_stub_library(&l.id))
    }

    pub fn language_of(&self, node: NodeId) -> &str {
        self.library(&self.node(node).library)
            .map_or("UNKNOWN", Library::language_or_unknown)
    }

    #[inline]
    pub fn deps(&self, id: NodeId) -> &[Dep] {
        &self.nodes[id.index()].deps
    }

    /// Versions with an edge into `id`.
    #[inline]
    pub fn dependents(&self, id: NodeId) -> &[NodeId] {
        &self.reverse[id.index()]
    }

    pub fn vulns_at(&self, id: NodeId) -> Option<&BTreeSet<String>> {
        self.vuln_matches.get(&id)
    }

    #[inline]
    pub fn is_vulnerable(&self, id: NodeId) -> bool {
        self.vuln_matches.contains_key(&id)
    }

    pub fn vulnerable_nodes(&self) -> impl Iterator<Item = (NodeId, &BTreeSet<String>)> + '_ {
        self.vuln_matches.iter().map(|(id, v)| (*id, v))
    }

    pub fn match_count(&self) -> usize {
        self.vuln_matches.values().map(BTreeSet::len).sum()
    }

    pub fn vuln(&self, id: &str) -> Option<&VulnRecord> {
        self.vulns.get(id)
    }

    pub fn vulns(&self) -> impl Iterator<Item = &VulnRecord> + '_ {
        self.vulns.values()
    }

    /// Nodes matched by the given vulnerability.
    pub fn nodes_matched_by(&self, vuln_id: &str) -> Vec<NodeId> {
        self.vuln_matches
            .iter()
            .filter(|(_, vs)| vs.contains(vuln_id))
            .map(|(id, _)| *id)
            .collect()
    }

    /// Copy of this graph with additional vulnerabilities and matches.
    pub(crate) fn with_matches(
        &self,
        vulns: impl IntoIterator<Item = VulnRecord>,
        matches: impl IntoIterator<Item = (NodeId, String)>,
    ) -> Graph {
        let mut next = self.clone();
        for v in vulns {
            next.vulns.insert(v.id.clone(), v);
        }
        for (node, id) in matches {
            next.vuln_matches.entry(node).or_default().insert(id);
        }
        next
    }
}

/// The latest non-stub version of a library: maximum release time, ties
/// broken by the higher version.
pub fn latest_version(graph: &Graph, library: &LibraryId) -> Result<NodeId, GraphError> {
    graph
        .versions_of(library)
        .iter()
        .copied()
        .filter(|&n| !graph.node(n).stub)
        .max_by(|&a, &b| {
            let (na, nb) = (graph.node(a), graph.node(b));
            (na.released, &na.version).cmp(&(nb.released, &nb.version))
        })
        .ok_or_else(|| GraphError::NoVersions(library.clone()))
}

/// Libraries with at least one edge between two non-stub versions.
pub fn connected_libraries(graph: &Graph) -> BTreeSet<LibraryId> {
    let mut out = BTreeSet::new();
    for (_, node) in graph.nodes() {
        if node.stub {
            continue;
        }
        for dep in &node.deps {
            let target = graph.node(dep.target);
            if !target.stub {
                out.insert(node.library.clone());
                out.insert(target.library.clone());
            }
        }
    }
    out
}
