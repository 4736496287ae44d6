//! Whether upgrading a root's direct dependency, at the root's release
//! time, would have cut a vulnerable dependency chain.

use std::collections::{BTreeMap, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{latest_version, Graph, NodeId};
use crate::model::{Provenance, Severity, VersionRef};
use crate::propagation::{reverse_distances, DependencyChain, ReverseBfs, UNREACHED};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UpgradeError {
    #[error("chain {0} is excluded from fixability analysis")]
    ExcludedChain(String),
    #[error("chain must have at least one edge")]
    ChainTooShort,
    #[error("chain is not a path in the graph")]
    InvalidChain,
    #[error("no vulnerability has a vulnerable chain")]
    NoChains,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Scope {
    AllVersions,
    LatestOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FixMode {
    /// The candidate must not depend on the chain's vulnerable version.
    #[default]
    StrictVersion,
    /// The candidate must not depend on any version matched by the vulnerability.
    VulnAware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FixReason {
    /// The direct dependency has no greater version.
    NotNewer,
    /// Greater versions exist, but none was released before the root.
    NoCandidateBeforeRelease,
    AllCandidatesStillVulnerable,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixResult {
    pub chain: DependencyChain,
    pub fixable: bool,
    pub candidate: Option<VersionRef>,
    pub reason: FixReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Grouping {
    Level,
    Severity,
    Language,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixRow {
    pub group: String,
    pub fixed: usize,
    pub not_fixed: usize,
    pub fixed_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixabilityReport {
    pub grouping: Grouping,
    pub scope: Scope,
    pub mode: FixMode,
    pub rows: Vec<FixRow>,
    pub fixed: usize,
    pub not_fixed: usize,
    pub excluded_chain_count: usize,
    pub total_chains: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Chains from [`enumerate_vulnerable_chains`], split by the exclusion filters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChainSet {
    pub vulnerable: Vec<DependencyChain>,
    /// First edge resolved from a manifest, or direct dependency on a stub library.
    pub excluded: Vec<DependencyChain>,
}

impl ChainSet {
    pub fn total(&self) -> usize {
        self.vulnerable.len() + self.excluded.len()
    }
}

fn roots(graph: &Graph, scope: Scope) -> Vec<bool> {
    let mut is_root = vec![false; graph.node_count()];
    match scope {
        Scope::AllVersions => {
            for (id, node) in graph.nodes() {
                is_root[id.index()] = !node.stub;
            }
        }
        Scope::LatestOnly => {
            for lib in graph.real_libraries() {
                if let Ok(n) = latest_version(graph, &lib.id) {
                    is_root[n.index()] = true;
                }
            }
        }
    }
    is_root
}

/// First hop of the canonical shortest path from `root`: lockfile edges
/// are preferred, then the smallest node id.
fn first_hop(graph: &Graph, bfs: &ReverseBfs, root: NodeId) -> NodeId {
    let want = bfs.dist(root) - 1;
    graph
        .deps(root)
        .iter()
        .filter(|d| bfs.dist(d.target) == want)
        .min_by_key(|d| (d.provenance != Provenance::Lockfile, d.target))
        .expect("a node at distance d has a dependency at distance d - 1")
        .target
}

fn canonical_path(graph: &Graph, bfs: &ReverseBfs, root: NodeId) -> Vec<NodeId> {
    let mut path = vec![root];
    let mut cur = first_hop(graph, bfs, root);
    path.push(cur);
    while bfs.dist(cur) > 0 {
        let want = bfs.dist(cur) - 1;
        cur = graph
            .deps(cur)
            .iter()
            .map(|d| d.target)
            .find(|&t| bfs.dist(t) == want)
            .expect("a node at distance d has a dependency at distance d - 1");
        path.push(cur);
    }
    path
}

fn is_excluded(graph: &Graph, root: NodeId, direct: NodeId) -> bool {
    let provenance = graph
        .deps(root)
        .iter()
        .find(|d| d.target == direct)
        .map(|d| d.provenance);
    provenance != Some(Provenance::Lockfile) || graph.is_stub_library(&graph.node(direct).library)
}

/// Calls `f(bfs, root, target)` for every root at distance >= 1 from each
/// vulnerable target. `bfs` holds distances to `target`.
fn visit_roots(graph: &Graph, scope: Scope, mut f: impl FnMut(&ReverseBfs, NodeId, NodeId)) {
    let is_root = roots(graph, scope);
    let mut bfs = ReverseBfs::new(graph);
    let targets: Vec<NodeId> = graph.vulnerable_nodes().map(|(n, _)| n).collect();
    for target in targets {
        bfs.run(graph, &[target]);
        let reached = std::mem::take(&mut bfs.reached);
        for &root in &reached[1..] {
            if is_root[root.index()] {
                f(&bfs, root, target);
            }
        }
        bfs.reached = reached;
    }
}

/// One shortest chain per (root, vulnerable version, vulnerability).
/// Roots that are themselves vulnerable are not chains for this analysis.
pub fn enumerate_vulnerable_chains(graph: &Graph, scope: Scope) -> ChainSet {
    let mut set = ChainSet::default();
    visit_roots(graph, scope, |bfs, root, target| {
        let nodes = canonical_path(graph, bfs, root);
        let excluded = is_excluded(graph, root, nodes[1]);
        for vuln_id in graph.vulns_at(target).into_iter().flatten() {
            let chain = DependencyChain {
                nodes: nodes.clone(),
                vuln_id: vuln_id.clone(),
            };
            if excluded {
                set.excluded.push(chain);
            } else {
                set.vulnerable.push(chain);
            }
        }
    });
    set
}

/// Candidate selection shared by the single-chain and bulk paths.
/// `blocked(c)` says whether candidate `c` still leads to the vulnerability.
fn judge(graph: &Graph, root: NodeId, direct: NodeId, blocked: impl Fn(NodeId) -> bool) -> (FixReason, Option<NodeId>) {
    let current = graph.node(direct);
    let deadline = graph.node(root).released;
    let mut newer = graph
        .versions_of(&current.library)
        .iter()
        .copied()
        .filter(|&c| {
            let n = graph.node(c);
            !n.stub && n.version > current.version
        })
        .peekable();
    if newer.peek().is_none() {
        return (FixReason::NotNewer, None);
    }
    let mut any = false;
    // versions_of is in ascending version order, so the first hit is the lowest.
    for c in newer.filter(|&c| graph.node(c).released < deadline) {
        any = true;
        if !blocked(c) {
            return (FixReason::Fixed, Some(c));
        }
    }
    if any {
        (FixReason::AllCandidatesStillVulnerable, None)
    } else {
        (FixReason::NoCandidateBeforeRelease, None)
    }
}

fn forward_reaches(graph: &Graph, start: NodeId, hit: impl Fn(NodeId) -> bool) -> bool {
    let mut seen = vec![false; graph.node_count()];
    let mut queue = VecDeque::from([start]);
    seen[start.index()] = true;
    while let Some(n) = queue.pop_front() {
        if hit(n) {
            return true;
        }
        for d in graph.deps(n) {
            if !seen[d.target.index()] {
                seen[d.target.index()] = true;
                queue.push_back(d.target);
            }
        }
    }
    false
}

fn matched(graph: &Graph, node: NodeId, vuln_id: &str) -> bool {
    graph.vulns_at(node).is_some_and(|vs| vs.contains(vuln_id))
}

/// Decides whether `chain` could have been cut by upgrading its first hop.
///
/// The lowest sufficient candidate is reported. When the direct dependency
/// is the vulnerable library itself, a candidate still matched by the same
/// vulnerability is not a fix in either mode.
pub fn chain_fixable_by_upgrade(
    graph: &Graph,
    chain: &DependencyChain,
    mode: FixMode,
) -> Result<FixResult, UpgradeError> {
    if chain.nodes.len() < 2 {
        return Err(UpgradeError::ChainTooShort);
    }
    if chain.nodes.iter().any(|n| n.index() >= graph.node_count())
        || chain
            .nodes
            .windows(2)
            .any(|w| !graph.deps(w[0]).iter().any(|d| d.target == w[1]))
    {
        return Err(UpgradeError::InvalidChain);
    }
    let (root, direct, target) = (chain.root(), chain.nodes[1], chain.target());
    if is_excluded(graph, root, direct) {
        return Err(UpgradeError::ExcludedChain(chain.display(graph)));
    }
    let vuln_id = chain.vuln_id.as_str();
    let direct_is_target = chain.length() == 1;
    let (reason, candidate) = judge(graph, root, direct, |c| {
        if direct_is_target && matched(graph, c, vuln_id) {
            return true;
        }
        match mode {
            FixMode::StrictVersion => forward_reaches(graph, c, |n| n == target),
            FixMode::VulnAware => forward_reaches(graph, c, |n| matched(graph, n, vuln_id)),
        }
    });
    Ok(FixResult {
        chain: chain.clone(),
        fixable: reason == FixReason::Fixed,
        candidate: candidate.map(|c| graph.node(c).key()),
        reason,
    })
}

/// Verdict for one chain from the bulk evaluator.
struct Verdict<'a> {
    target: NodeId,
    vuln_id: &'a str,
    length: u32,
    excluded: bool,
    fixed: bool,
}

fn evaluate_all<'g>(graph: &'g Graph, scope: Scope, mode: FixMode, mut f: impl FnMut(Verdict<'g>)) {
    // nodes that can reach some version matched by a given vulnerability
    let mut vuln_reach: HashMap<&str, Vec<bool>> = HashMap::new();
    if mode == FixMode::VulnAware {
        for v in graph.vulns() {
            let dist = reverse_distances(graph, graph.nodes_matched_by(&v.id));
            vuln_reach.insert(v.id.as_str(), dist.into_iter().map(|d| d != UNREACHED).collect());
        }
    }
    visit_roots(graph, scope, |bfs, root, target| {
        let direct = first_hop(graph, bfs, root);
        let length = bfs.dist(root);
        let excluded = is_excluded(graph, root, direct);
        for vuln_id in graph.vulns_at(target).into_iter().flatten() {
            let vuln_id: &'g str = vuln_id.as_str();
            let fixed = !excluded && {
                let (reason, _) = judge(graph, root, direct, |c| {
                    if length == 1 && matched(graph, c, vuln_id) {
                        return true;
                    }
                    match mode {
                        FixMode::StrictVersion => bfs.dist(c) != UNREACHED,
                        FixMode::VulnAware => vuln_reach[vuln_id][c.index()],
                    }
                });
                reason == FixReason::Fixed
            };
            f(Verdict {
                target,
                vuln_id,
                length,
                excluded,
                fixed,
            });
        }
    });
}

pub fn fixability_report(graph: &Graph, grouping: Grouping, scope: Scope, mode: FixMode) -> FixabilityReport {
    let mut groups: BTreeMap<(u32, String), (usize, usize)> = BTreeMap::new();
    if grouping == Grouping::Severity {
        for (rank, s) in Severity::SCORED.iter().enumerate() {
            groups.insert((rank as u32, s.as_str().to_string()), (0, 0));
        }
    }
    let mut excluded = 0;
    let mut total = 0;
    evaluate_all(graph, scope, mode, |v| {
        total += 1;
        if v.excluded {
            excluded += 1;
            return;
        }
        let key = match grouping {
            Grouping::Level => (v.length, v.length.to_string()),
            Grouping::Severity => {
                let severity = graph.vuln(v.vuln_id).map(|r| r.severity).unwrap_or(Severity::Unknown);
                let rank = Severity::SCORED
                    .iter()
                    .position(|s| *s == severity)
                    .unwrap_or(Severity::SCORED.len());
                (rank as u32, severity.as_str().to_string())
            }
            Grouping::Language => (0, graph.language_of(v.target).to_string()),
        };
        let cell = groups.entry(key).or_default();
        if v.fixed {
            cell.0 += 1;
        } else {
            cell.1 += 1;
        }
    });
    let rows: Vec<FixRow> = groups
        .into_iter()
        .map(|((_, group), (fixed, not_fixed))| FixRow {
            group,
            fixed,
            not_fixed,
            fixed_fraction: if fixed + not_fixed == 0 {
                0.0
            } else {
                fixed as f64 / (fixed + not_fixed) as f64
            },
        })
        .collect();
    FixabilityReport {
        grouping,
        scope,
        mode,
        fixed: rows.iter().map(|r| r.fixed).sum(),
        not_fixed: rows.iter().map(|r| r.not_fixed).sum(),
        rows,
        excluded_chain_count: excluded,
        total_chains: total,
    }
}

/// Per-vulnerability fixed fraction over its non-excluded chains.
pub fn per_vuln_fix_rates(graph: &Graph, scope: Scope, mode: FixMode) -> BTreeMap<String, f64> {
    let mut tally: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    evaluate_all(graph, scope, mode, |v| {
        if !v.excluded {
            let t = tally.entry(v.vuln_id).or_default();
            t.1 += 1;
            if v.fixed {
                t.0 += 1;
            }
        }
    });
    tally
        .into_iter()
        .map(|(id, (fixed, total))| (id.to_string(), fixed as f64 / total as f64))
        .collect()
}

/// Linear-interpolation quantile of sorted data (the common "type 7" rule).
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn per_vuln_fix_rate_quartiles(graph: &Graph, scope: Scope, mode: FixMode) -> Result<Quartiles, UpgradeError> {
    let mut rates: Vec<f64> = per_vuln_fix_rates(graph, scope, mode).into_values().collect();
    if rates.is_empty() {
        return Err(UpgradeError::NoChains);
    }
    rates.sort_by(f64::total_cmp);
    Ok(Quartiles {
        q1: quantile(&rates, 0.25),
        median: quantile(&rates, 0.5),
        q3: quantile(&rates, 0.75),
    })
}
