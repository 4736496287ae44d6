//! Attaches vulnerability records to the library versions they affect.
//!
//! Matching is driven purely by the `affected` entries of each record;
//! there is no fuzzy name matching.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Warning, WarningKind};
use crate::graph::{Graph, NodeId};
use crate::model::LibraryId;
use crate::version::Version;
use crate::vuln::VulnRecord;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VulnMatch {
    pub vuln_id: String,
    pub library: LibraryId,
    pub version: Version,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub graph: Graph,
    /// Number of versions each vulnerability matched in this run.
    pub per_vuln_counts: BTreeMap<String, usize>,
    /// `(vuln id, library)` pairs whose library is absent from the graph.
    pub unknown_libraries: Vec<(String, LibraryId)>,
    /// Vulnerabilities that matched no version at all.
    pub unmatched: Vec<String>,
    pub warnings: Vec<Warning>,
}

/// Versions of `graph` affected by `vuln`. Stub versions never match.
pub fn affected_versions(graph: &Graph, vuln: &VulnRecord) -> Vec<NodeId> {
    let mut out = Vec::new();
    for affected in &vuln.affected {
        for &node in graph.versions_of(&affected.library) {
            let n = graph.node(node);
            if !n.stub && affected.contains(&n.version) {
                out.push(node);
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Returns a new graph with `vulns` added and matched.
///
/// Re-matching records that are already present adds no duplicates.
pub fn match_vulnerabilities(graph: &Graph, vulns: &[VulnRecord]) -> MatchOutcome {
    let mut matches = Vec::new();
    let mut per_vuln_counts = BTreeMap::new();
    let mut unknown_libraries = Vec::new();
    let mut unmatched = Vec::new();
    let mut warnings = Vec::new();

    for vuln in vulns {
        for affected in &vuln.affected {
            if graph.library(&affected.library).is_none() {
                warnings.push(Warning::new(
                    WarningKind::UnknownLibrary,
                    format!("{} affects {}, which is not in the graph", vuln.id, affected.library),
                ));
                unknown_libraries.push((vuln.id.clone(), affected.library.clone()));
            }
        }
        let nodes = affected_versions(graph, vuln);
        per_vuln_counts.insert(vuln.id.clone(), nodes.len());
        if nodes.is_empty() {
            warnings.push(Warning::new(
                WarningKind::UnmatchedVulnerability,
                format!("{} matches no library version", vuln.id),
            ));
            unmatched.push(vuln.id.clone());
        }
        matches.extend(nodes.into_iter().map(|n| (n, vuln.id.clone())));
    }

    MatchOutcome {
        graph: graph.with_matches(vulns.iter().cloned(), matches),
        per_vuln_counts,
        unknown_libraries,
        unmatched,
        warnings,
    }
}

/// All matches recorded in `graph`, in deterministic order.
pub fn list_matches(graph: &Graph) -> Vec<VulnMatch> {
    graph
        .vulnerable_nodes()
        .flat_map(|(id, vulns)| {
            let node = graph.node(id);
            vulns.iter().map(move |v| VulnMatch {
                vuln_id: v.clone(),
                library: node.library.clone(),
                version: node.version.clone(),
            })
        })
        .collect()
}
