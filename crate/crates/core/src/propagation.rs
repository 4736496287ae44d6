//! Shortest dependency levels to vulnerable versions and the histograms
//! and ecosystem statistics built on them.
//!
//! Distances are edge counts along dependency edges. Traversals keep a
//! visited set, so cyclic input is tolerated.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::graph::{connected_libraries, latest_version, Graph, GraphError, NodeId};
use crate::model::{LibraryId, VersionRef};

pub(crate) const UNREACHED: u32 = u32::MAX;

/// A path from a root version to a vulnerable version, root first.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DependencyChain {
    pub nodes: Vec<NodeId>,
    /// The vulnerability at the terminal node this chain is counted for.
    pub vuln_id: String,
}

impl DependencyChain {
    /// Number of edges. Zero means the root itself is vulnerable.
    pub fn length(&self) -> usize {
        self.nodes.len().saturating_sub(1)
    }

    pub fn root(&self) -> NodeId {
        self.nodes[0]
    }

    pub fn target(&self) -> NodeId {
        *self.nodes.last().expect("chain has at least one node")
    }

    /// The root's direct dependency on this chain, if any.
    pub fn direct_dependency(&self) -> Option<NodeId> {
        self.nodes.get(1).copied()
    }

    pub fn refs(&self, graph: &Graph) -> Vec<VersionRef> {
        self.nodes.iter().map(|&n| graph.node(n).key()).collect()
    }

    /// Renders as `a@1 -> b@2 -> c@3`.
    pub fn display(&self, graph: &Graph) -> String {
        self.refs(graph)
            .iter()
            .map(|r| r.to_string())
            .collect::<Vec<_>>()
            .join(" -> ")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum HistogramMode {
    /// Each library counted once, at its shortest level.
    ShortestPerLibrary,
    /// Each library counted at every level where it reaches a vulnerable version.
    AllLevels,
}

/// How [`HistogramMode::AllLevels`] derives the levels of a (library, target) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LevelCounting {
    /// Only the minimal distance from the library to each vulnerable version.
    #[default]
    MinimalPerTarget,
    /// Every distinct walk length up to [`MAX_WALK_LEVEL`].
    AllPathLengths,
}

/// Longest walk tracked by [`LevelCounting::AllPathLengths`].
pub const MAX_WALK_LEVEL: u32 = 63;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Stratify {
    None,
    /// Language of the vulnerable library.
    Language,
    /// Severity of the vulnerability.
    Severity,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HistogramRow {
    pub stratum: String,
    pub level: u32,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationReport {
    pub mode: HistogramMode,
    pub stratify: Stratify,
    /// Sorted by stratum, then level.
    pub rows: Vec<HistogramRow>,
    pub affected_libraries: usize,
    pub max_level: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcosystemStats {
    pub total_libraries: usize,
    pub total_vulnerabilities: usize,
    pub vulns_per_10k: f64,
    pub connected_count: usize,
    pub connected_affected_fraction: f64,
    pub latest_affected_fraction: f64,
    pub max_chain_level: Option<u32>,
}

/// Breadth-first distance from every node to the nearest source, following
/// dependency edges backwards. Unreached nodes hold [`UNREACHED`].
pub(crate) fn reverse_distances(graph: &Graph, sources: impl IntoIterator<Item = NodeId>) -> Vec<u32> {
    let mut dist = vec![UNREACHED; graph.node_count()];
    let mut queue = VecDeque::new();
    for s in sources {
        if dist[s.index()] == UNREACHED {
            dist[s.index()] = 0;
            queue.push_back(s);
        }
    }
    while let Some(n) = queue.pop_front() {
        let next = dist[n.index()] + 1;
        for &p in graph.dependents(n) {
            if dist[p.index()] == UNREACHED {
                dist[p.index()] = next;
                queue.push_back(p);
            }
        }
    }
    dist
}

/// Reusable single-source reverse BFS that only touches reached nodes.
pub(crate) struct ReverseBfs {
    dist: Vec<u32>,
    pub(crate) reached: Vec<NodeId>,
}

impl ReverseBfs {
    pub(crate) fn new(graph: &Graph) -> Self {
        ReverseBfs {
            dist: vec![UNREACHED; graph.node_count()],
            reached: Vec::new(),
        }
    }

    pub(crate) fn run(&mut self, graph: &Graph, sources: &[NodeId]) {
        for n in self.reached.drain(..) {
            self.dist[n.index()] = UNREACHED;
        }
        for &s in sources {
            if self.dist[s.index()] == UNREACHED {
                self.dist[s.index()] = 0;
                self.reached.push(s);
            }
        }
        let mut head = 0;
        while head < self.reached.len() {
            let n = self.reached[head];
            head += 1;
            let next = self.dist[n.index()] + 1;
            for &p in graph.dependents(n) {
                if self.dist[p.index()] == UNREACHED {
                    self.dist[p.index()] = next;
                    self.reached.push(p);
                }
            }
        }
    }

    #[inline]
    pub(crate) fn dist(&self, n: NodeId) -> u32 {
        self.dist[n.index()]
    }
}

fn option(d: u32) -> Option<u32> {
    (d != UNREACHED).then_some(d)
}

/// Distance from `root` to the nearest vulnerable version; 0 when `root`
/// itself is vulnerable.
pub fn shortest_vuln_distance(graph: &Graph, root: &VersionRef) -> Result<Option<u32>, GraphError> {
    let start = graph
        .find_ref(root)
        .ok_or_else(|| GraphError::UnknownVersion(root.clone()))?;
    let mut seen = vec![false; graph.node_count()];
    let mut queue = VecDeque::from([(start, 0u32)]);
    seen[start.index()] = true;
    while let Some((n, d)) = queue.pop_front() {
        if graph.is_vulnerable(n) {
            return Ok(Some(d));
        }
        for dep in graph.deps(n) {
            if !seen[dep.target.index()] {
                seen[dep.target.index()] = true;
                queue.push_back((dep.target, d + 1));
            }
        }
    }
    Ok(None)
}

/// Shortest distance to a vulnerable version for every node, by id.
pub fn all_shortest_distances(graph: &Graph) -> Vec<Option<u32>> {
    reverse_distances(graph, graph.vulnerable_nodes().map(|(n, _)| n))
        .into_iter()
        .map(option)
        .collect()
}

fn min_over_versions(graph: &Graph, dist: &[u32], library: &LibraryId) -> Option<u32> {
    graph
        .versions_of(library)
        .iter()
        .map(|n| dist[n.index()])
        .min()
        .and_then(option)
}

/// Minimum of [`shortest_vuln_distance`] over all versions of `library`.
pub fn library_shortest_level(graph: &Graph, library: &LibraryId) -> Option<u32> {
    let sources: Vec<NodeId> = graph.vulnerable_nodes().map(|(n, _)| n).collect();
    let mut bfs = ReverseBfs::new(graph);
    bfs.run(graph, &sources);
    graph
        .versions_of(library)
        .iter()
        .map(|&n| bfs.dist(n))
        .min()
        .and_then(option)
}

/// Shortest level of every non-stub library that reaches a vulnerable version.
pub fn library_levels(graph: &Graph) -> BTreeMap<LibraryId, u32> {
    let dist = reverse_distances(graph, graph.vulnerable_nodes().map(|(n, _)| n));
    graph
        .real_libraries()
        .filter_map(|l| min_over_versions(graph, &dist, &l.id).map(|d| (l.id.clone(), d)))
        .collect()
}

fn stratum_of(graph: &Graph, stratify: Stratify, node: NodeId, vuln_id: &str) -> String {
    match stratify {
        Stratify::None => "all".to_string(),
        Stratify::Language => graph.language_of(node).to_string(),
        Stratify::Severity => graph
            .vuln(vuln_id)
            .map(|v| v.severity.as_str())
            .unwrap_or("UNKNOWN")
            .to_string(),
    }
}

/// Walk-length bitmasks towards `target` for the nodes in `reach`. `masks`
/// must be zero everywhere on entry.
fn walk_lengths(graph: &Graph, target: NodeId, reach: &[NodeId], masks: &mut [u64]) {
    masks[target.index()] = 1;
    // Nodes in `reach` are in BFS order from the target; iterating in
    // reverse settles acyclic input in one pass, cycles take a few more.
    loop {
        let mut changed = false;
        for &n in reach.iter().rev() {
            let mut m = if n == target { 1 } else { 0 };
            for dep in graph.deps(n) {
                m |= masks[dep.target.index()] << 1;
            }
            let merged = masks[n.index()] | m;
            if merged != masks[n.index()] {
                masks[n.index()] = merged;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

pub fn propagation_histogram(graph: &Graph, mode: HistogramMode, stratify: Stratify) -> PropagationReport {
    propagation_histogram_with(graph, mode, stratify, LevelCounting::default())
}

pub fn propagation_histogram_with(
    graph: &Graph,
    mode: HistogramMode,
    stratify: Stratify,
    counting: LevelCounting,
) -> PropagationReport {
    // (stratum, level, library)
    let mut cells: BTreeSet<(String, u32, LibraryId)> = BTreeSet::new();
    let mut bfs = ReverseBfs::new(graph);

    match mode {
        HistogramMode::ShortestPerLibrary => {
            let mut by_stratum: BTreeMap<String, BTreeSet<NodeId>> = BTreeMap::new();
            for (n, vulns) in graph.vulnerable_nodes() {
                for v in vulns {
                    by_stratum
                        .entry(stratum_of(graph, stratify, n, v))
                        .or_default()
                        .insert(n);
                }
            }
            for (stratum, sources) in by_stratum {
                let sources: Vec<NodeId> = sources.into_iter().collect();
                bfs.run(graph, &sources);
                let mut best: BTreeMap<&LibraryId, u32> = BTreeMap::new();
                for &n in &bfs.reached {
                    let lib = &graph.node(n).library;
                    let d = bfs.dist(n);
                    best.entry(lib).and_modify(|b| *b = (*b).min(d)).or_insert(d);
                }
                for (lib, level) in best {
                    cells.insert((stratum.clone(), level, lib.clone()));
                }
            }
        }
        HistogramMode::AllLevels => {
            let mut masks = vec![0u64; graph.node_count()];
            for (t, vulns) in graph.vulnerable_nodes() {
                let strata: BTreeSet<String> = vulns.iter().map(|v| stratum_of(graph, stratify, t, v)).collect();
                bfs.run(graph, &[t]);
                let mut levels: BTreeMap<&LibraryId, u64> = BTreeMap::new();
                match counting {
                    LevelCounting::MinimalPerTarget => {
                        let mut best: BTreeMap<&LibraryId, u32> = BTreeMap::new();
                        for &n in &bfs.reached {
                            let d = bfs.dist(n);
                            best.entry(&graph.node(n).library)
                                .and_modify(|b| *b = (*b).min(d))
                                .or_insert(d);
                        }
                        for (lib, d) in best {
                            levels.insert(lib, 1u64 << d.min(MAX_WALK_LEVEL));
                        }
                    }
                    LevelCounting::AllPathLengths => {
                        walk_lengths(graph, t, &bfs.reached, &mut masks);
                        for &n in &bfs.reached {
                            *levels.entry(&graph.node(n).library).or_default() |= masks[n.index()];
                            masks[n.index()] = 0;
                        }
                    }
                }
                for (lib, mask) in levels {
                    for level in (0..=MAX_WALK_LEVEL).filter(|b| mask & (1u64 << b) != 0) {
                        for s in &strata {
                            cells.insert((s.clone(), level, lib.clone()));
                        }
                    }
                }
            }
        }
    }

    let mut counts: BTreeMap<(String, u32), usize> = BTreeMap::new();
    let mut affected = BTreeSet::new();
    let mut max_level = None;
    for (stratum, level, lib) in cells {
        *counts.entry((stratum, level)).or_default() += 1;
        max_level = max_level.max(Some(level));
        affected.insert(lib);
    }
    PropagationReport {
        mode,
        stratify,
        rows: counts
            .into_iter()
            .map(|((stratum, level), count)| HistogramRow { stratum, level, count })
            .collect(),
        affected_libraries: affected.len(),
        max_level,
    }
}

fn fraction(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn ecosystem_stats(graph: &Graph) -> EcosystemStats {
    let total_libraries = graph.real_libraries().count();
    let total_vulnerabilities = graph
        .vulns()
        .filter(|v| !graph.nodes_matched_by(&v.id).is_empty())
        .count();
    let dist = reverse_distances(graph, graph.vulnerable_nodes().map(|(n, _)| n));
    let connected = connected_libraries(graph);

    let mut connected_affected = 0;
    let mut latest_affected = 0;
    for lib in &connected {
        if min_over_versions(graph, &dist, lib).is_some_and(|d| d >= 1) {
            connected_affected += 1;
        }
        if let Ok(latest) = latest_version(graph, lib) {
            if option(dist[latest.index()]).is_some_and(|d| d >= 1) {
                latest_affected += 1;
            }
        }
    }
    let max_chain_level = graph
        .real_libraries()
        .filter_map(|l| min_over_versions(graph, &dist, &l.id))
        .max();

    EcosystemStats {
        total_libraries,
        total_vulnerabilities,
        vulns_per_10k: if total_libraries == 0 {
            0.0
        } else {
            10_000.0 * total_vulnerabilities as f64 / total_libraries as f64
        },
        connected_count: connected.len(),
        connected_affected_fraction: fraction(connected_affected, connected.len()),
        latest_affected_fraction: fraction(latest_affected, connected.len()),
        max_chain_level,
    }
}
