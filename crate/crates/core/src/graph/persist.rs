//! Newline-delimited JSON persistence.
//!
//! One record per line, discriminated by `kind`. Loading is insensitive to
//! record order; saving is deterministic.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::model::{LibraryId, PackageManager, Provenance, VersionRef};
use crate::version::Version;
use crate::vuln::VulnRecord;

use super::{Graph, GraphError, Library, NodeSpec};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum Record {
    Library {
        id: LibraryId,
        language: Option<String>,
        pms: Vec<PackageManager>,
    },
    Version {
        library: LibraryId,
        version: Version,
        released: i64,
        stub: bool,
    },
    Dep {
        from: (LibraryId, Version),
        to: (LibraryId, Version),
        provenance: Provenance,
    },
    Vuln(VulnRecord),
    Match {
        library: LibraryId,
        version: Version,
        vuln: String,
    },
}

fn io_err(e: impl std::fmt::Display) -> GraphError {
    GraphError::Io(e.to_string())
}

pub fn save_graph<W: Write>(graph: &Graph, mut sink: W) -> Result<(), GraphError> {
    let mut emit = |record: &Record| -> Result<(), GraphError> {
        serde_json::to_writer(&mut sink, record).map_err(io_err)?;
        sink.write_all(b"\n").map_err(io_err)
    };
    for lib in graph.libraries() {
        emit(&Record::Library {
            id: lib.id.clone(),
            language: lib.language.clone(),
            pms: lib.package_managers.iter().copied().collect(),
        })?;
    }
    for (_, node) in graph.nodes() {
        emit(&Record::Version {
            library: node.library.clone(),
            version: node.version.clone(),
            released: node.released,
            stub: node.stub,
        })?;
    }
    for (_, node) in graph.nodes() {
        for dep in &node.deps {
            let target = graph.node(dep.target);
            emit(&Record::Dep {
                from: (node.library.clone(), node.version.clone()),
                to: (target.library.clone(), target.version.clone()),
                provenance: dep.provenance,
            })?;
        }
    }
    for vuln in graph.vulns() {
        emit(&Record::Vuln(vuln.clone()))?;
    }
    for (id, vulns) in graph.vulnerable_nodes() {
        let node = graph.node(id);
        for vuln in vulns {
            emit(&Record::Match {
                library: node.library.clone(),
                version: node.version.clone(),
                vuln: vuln.clone(),
            })?;
        }
    }
    sink.flush().map_err(io_err)
}

pub fn load_graph<R: BufRead>(source: R) -> Result<Graph, GraphError> {
    let mut libraries: BTreeMap<LibraryId, Library> = BTreeMap::new();
    let mut specs: BTreeMap<VersionRef, (usize, NodeSpec)> = BTreeMap::new();
    let mut deps: Vec<(usize, VersionRef, VersionRef, Provenance)> = Vec::new();
    let mut vulns: BTreeMap<String, VulnRecord> = BTreeMap::new();
    let mut matches: Vec<(usize, VersionRef, String)> = Vec::new();

    for (idx, line) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| GraphError::MalformedRecord {
            line: lineno,
            message: e.to_string(),
        })?;
        let conflict = |key: String| GraphError::VersionConflict { line: lineno, key };
        match record {
            Record::Library { id, language, pms } => {
                if libraries.contains_key(&id) {
                    return Err(conflict(format!("library {id}")));
                }
                libraries.insert(
                    id.clone(),
                    Library {
                        id,
                        language,
                        package_managers: pms.into_iter().collect(),
                    },
                );
            }
            Record::Version {
                library,
                version,
                released,
                stub,
            } => {
                let key = VersionRef::new(library.clone(), version.clone());
                if specs.contains_key(&key) {
                    return Err(conflict(format!("version {key}")));
                }
                specs.insert(
                    key,
                    (
                        lineno,
                        NodeSpec {
                            library,
                            version,
                            released,
                            stub,
                            deps: Vec::new(),
                        },
                    ),
                );
            }
            Record::Dep { from, to, provenance } => deps.push((
                lineno,
                VersionRef::new(from.0, from.1),
                VersionRef::new(to.0, to.1),
                provenance,
            )),
            Record::Vuln(v) => {
                if vulns.contains_key(&v.id) {
                    return Err(conflict(format!("vuln {}", v.id)));
                }
                vulns.insert(v.id.clone(), v);
            }
            Record::Match { library, version, vuln } => matches.push((lineno, VersionRef::new(library, version), vuln)),
        }
    }

    let mut seen_deps = HashSet::new();
    for (line, from, to, provenance) in deps {
        if !specs.contains_key(&to) {
            return Err(GraphError::MalformedRecord {
                line,
                message: format!("dependency target {to} has no version record"),
            });
        }
        if !seen_deps.insert((from.clone(), to.clone())) {
            return Err(GraphError::VersionConflict {
                line,
                key: format!("dep {from} -> {to}"),
            });
        }
        match specs.get_mut(&from) {
            Some((_, spec)) => spec.deps.push((to, provenance)),
            None => {
                return Err(GraphError::MalformedRecord {
                    line,
                    message: format!("dependency source {from} has no version record"),
                })
            }
        }
    }
    let mut seen_matches = HashSet::new();
    let mut match_list = Vec::with_capacity(matches.len());
    for (line, key, vuln) in matches {
        if !specs.contains_key(&key) || !vulns.contains_key(&vuln) {
            return Err(GraphError::MalformedRecord {
                line,
                message: format!("match {key} / {vuln} references a missing record"),
            });
        }
        if !seen_matches.insert((key.clone(), vuln.clone())) {
            return Err(GraphError::VersionConflict {
                line,
                key: format!("match {key} / {vuln}"),
            });
        }
        match_list.push((key, vuln));
    }
    let specs: Vec<NodeSpec> = specs.into_values().map(|(_, s)| s).collect();
    Graph::from_parts(
        libraries.into_values().collect(),
        specs,
        vulns.into_values().collect(),
        match_list,
    )
}
