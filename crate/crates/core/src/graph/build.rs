use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};

use crate::diagnostics::{Warning, WarningKind};
use crate::ingest::{Constraint, LibraryMeta, RequirementSet, ResolvedManifest};
use crate::model::{LibraryId, PackageManager, Provenance, VersionRef};
use crate::version::Version;

use super::{Graph, GraphError, Library, NodeSpec};

/// What is known about a version's dependencies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ManifestSource {
    /// No dependency information; the version has no edges.
    None,
    Resolved(ResolvedManifest),
    Requirements(RequirementSet),
}

/// One ingested library version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuildInput {
    pub library: LibraryId,
    pub version: Version,
    /// Release time, UTC seconds.
    pub released: i64,
    /// Package manager, when it cannot be inferred from `source`.
    pub package_manager: Option<PackageManager>,
    pub source: ManifestSource,
}

impl BuildInput {
    pub fn new(library: LibraryId, version: Version, released: i64, source: ManifestSource) -> Self {
        BuildInput {
            library,
            version,
            released,
            package_manager: None,
            source,
        }
    }

    fn package_manager(&self) -> Option<PackageManager> {
        self.package_manager.or(match &self.source {
            ManifestSource::None => None,
            ManifestSource::Resolved(m) => Some(m.source_kind.package_manager()),
            ManifestSource::Requirements(r) => Some(r.source_kind.package_manager()),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutcome {
    pub graph: Graph,
    /// Stub nodes materialized for dependency targets never ingested.
    pub stub_count: usize,
    pub warnings: Vec<Warning>,
}

/// Highest version allowed by `constraint` among those released strictly
/// before `dependent_released`.
pub fn resolve_requirement<'a, I>(available: I, constraint: &Constraint, dependent_released: i64) -> Option<Version>
where
    I: IntoIterator<Item = (&'a Version, i64)>,
{
    available
        .into_iter()
        .filter(|(v, released)| *released < dependent_released && constraint.allows(v))
        .map(|(v, _)| v)
        .max()
        .cloned()
}

/// Libraries each input names as its own direct dependencies, before any
/// cross-file refinement.
fn declared_libraries(source: &ManifestSource) -> Vec<LibraryId> {
    match source {
        ManifestSource::None => Vec::new(),
        ManifestSource::Requirements(set) => set.requirements.iter().map(|r| r.library.clone()).collect(),
        ManifestSource::Resolved(m) if m.source_kind.is_flat() => m.entries.iter().map(|e| e.library.clone()).collect(),
        ManifestSource::Resolved(m) => lockfile_roots(m),
    }
}

/// Entries not depended upon by another entry of the same lockfile.
fn lockfile_roots(manifest: &ResolvedManifest) -> Vec<LibraryId> {
    let nested: HashSet<&LibraryId> = manifest
        .entries
        .iter()
        .flat_map(|e| e.deps.iter().filter(move |d| **d != e.library))
        .collect();
    let roots: Vec<LibraryId> = manifest
        .entries
        .iter()
        .filter(|e| !nested.contains(&e.library))
        .map(|e| e.library.clone())
        .collect();
    if roots.is_empty() {
        // every entry is depended upon: a cycle, keep them all
        manifest.entries.iter().map(|e| e.library.clone()).collect()
    } else {
        roots
    }
}

struct Builder<'a> {
    inputs: &'a [BuildInput],
    by_key: HashMap<VersionRef, usize>,
    declared: Vec<Vec<LibraryId>>,
}

impl Builder<'_> {
    /// Libraries of `file` reachable from entry `start` through the
    /// dependency declarations of the entries' own ingested versions.
    fn closure_within(&self, file: &BTreeMap<&LibraryId, &Version>, start: &LibraryId) -> HashSet<LibraryId> {
        let mut seen = HashSet::new();
        let mut queue = VecDeque::from([start.clone()]);
        while let Some(lib) = queue.pop_front() {
            let Some(version) = file.get(&lib) else { continue };
            let key = VersionRef::new(lib.clone(), (*version).clone());
            let Some(&idx) = self.by_key.get(&key) else { continue };
            for dep in &self.declared[idx] {
                if file.contains_key(dep) && seen.insert(dep.clone()) {
                    queue.push_back(dep.clone());
                }
            }
        }
        seen
    }

    /// Direct dependencies of the owner of a flat resolution file: entries
    /// that are not transitively pulled in by another entry.
    fn flat_direct(&self, manifest: &ResolvedManifest) -> Vec<LibraryId> {
        let file: BTreeMap<&LibraryId, &Version> = manifest.entries.iter().map(|e| (&e.library, &e.version)).collect();
        let closures: HashMap<&LibraryId, HashSet<LibraryId>> = manifest
            .entries
            .iter()
            .map(|e| (&e.library, self.closure_within(&file, &e.library)))
            .collect();
        manifest
            .entries
            .iter()
            .filter(|x| {
                !manifest.entries.iter().any(|y| {
                    y.library != x.library
                        && closures[&y.library].contains(&x.library)
                        && !closures[&x.library].contains(&y.library)
                })
            })
            .map(|e| e.library.clone())
            .collect()
    }
}

/// Builds the dependency graph from ingested library versions.
///
/// Resolution-file entries become `Lockfile` edges from the owner to the
/// entries it depends on directly. Requirement sets are resolved against
/// the versions released strictly before the owner. Targets that were
/// never ingested become stub nodes.
pub fn build_graph(inputs: Vec<BuildInput>, metadata: &[LibraryMeta]) -> Result<BuildOutcome, GraphError> {
    let mut unique: Vec<BuildInput> = Vec::with_capacity(inputs.len());
    let mut by_key: HashMap<VersionRef, usize> = HashMap::with_capacity(inputs.len());
    for input in inputs {
        let key = VersionRef::new(input.library.clone(), input.version.clone());
        match by_key.get(&key) {
            Some(&i) if unique[i] == input => continue,
            Some(_) => return Err(GraphError::DuplicateVersion(key)),
            None => {
                if input.released <= 0 {
                    return Err(GraphError::InvalidRelease(key));
                }
                by_key.insert(key, unique.len());
                unique.push(input);
            }
        }
    }
    let inputs = unique;

    let mut available: HashMap<&LibraryId, Vec<(&Version, i64)>> = HashMap::new();
    for input in &inputs {
        available
            .entry(&input.library)
            .or_default()
            .push((&input.version, input.released));
    }

    let builder = Builder {
        inputs: &inputs,
        declared: inputs.iter().map(|i| declared_libraries(&i.source)).collect(),
        by_key,
    };

    let mut warnings = Vec::new();
    let mut libraries: BTreeMap<LibraryId, Library> = BTreeMap::new();
    let mut stubs: BTreeMap<VersionRef, NodeSpec> = BTreeMap::new();
    let mut specs = Vec::with_capacity(inputs.len());

    for input in builder.inputs {
        let owner = VersionRef::new(input.library.clone(), input.version.clone());
        let lib = libraries
            .entry(input.library.clone())
            .or_insert_with(|| Library::new(input.library.clone()));
        if let Some(pm) = input.package_manager() {
            lib.package_managers.insert(pm);
        }

        let mut deps = Vec::new();
        match &input.source {
            ManifestSource::None => {}
            ManifestSource::Resolved(manifest) => {
                let direct = if manifest.source_kind.is_flat() {
                    builder.flat_direct(manifest)
                } else {
                    for entry in &manifest.entries {
                        for dep in &entry.deps {
                            if manifest.entry(dep).is_none() {
                                warnings.push(Warning::new(
                                    WarningKind::DanglingDependency,
                                    format!(
                                        "{owner}: {} depends on {dep}, which the lockfile does not pin",
                                        entry.library
                                    ),
                                ));
                            }
                        }
                    }
                    lockfile_roots(manifest)
                };
                let pm = manifest.source_kind.package_manager();
                for lib_id in direct {
                    if lib_id == input.library {
                        continue;
                    }
                    let entry = manifest.entry(&lib_id).expect("direct deps come from entries");
                    let target = VersionRef::new(entry.library.clone(), entry.version.clone());
                    if !builder.by_key.contains_key(&target) && !stubs.contains_key(&target) {
                        warnings.push(Warning::new(
                            WarningKind::StubNode,
                            format!("{target} (required by {owner}) was never ingested; added as stub"),
                        ));
                        stubs.insert(
                            target.clone(),
                            NodeSpec {
                                library: target.library.clone(),
                                version: target.version.clone(),
                                released: 0,
                                stub: true,
                                deps: Vec::new(),
                            },
                        );
                        libraries
                            .entry(target.library.clone())
                            .or_insert_with(|| Library::new(target.library.clone()))
                            .package_managers
                            .insert(pm);
                    }
                    deps.push((target, Provenance::Lockfile));
                }
            }
            ManifestSource::Requirements(set) => {
                for req in &set.requirements {
                    if req.library == input.library {
                        continue;
                    }
                    let candidates = available.get(&req.library).into_iter().flatten().copied();
                    match resolve_requirement(candidates, &req.constraint, input.released) {
                        Some(version) => deps.push((
                            VersionRef::new(req.library.clone(), version),
                            Provenance::ManifestResolved,
                        )),
                        None => warnings.push(Warning::new(
                            WarningKind::UnresolvedRequirement,
                            format!(
                                "{owner}: no version of {} released before it satisfies {:?}",
                                req.library, req.constraint
                            ),
                        )),
                    }
                }
            }
        }
        specs.push(NodeSpec {
            library: input.library.clone(),
            version: input.version.clone(),
            released: input.released,
            stub: false,
            deps,
        });
    }

    for meta in metadata {
        if let Some(lib) = libraries.get_mut(&meta.library) {
            lib.language = Some(meta.language.clone());
        }
    }

    let stub_count = stubs.len();
    specs.extend(stubs.into_values());
    let graph = Graph::from_parts(libraries.into_values().collect(), specs, Vec::new(), Vec::new())?;
    Ok(BuildOutcome {
        graph,
        stub_count,
        warnings,
    })
}
