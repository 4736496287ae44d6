//! Public vulnerability records.

use serde::{Deserialize, Serialize};

use crate::model::{LibraryId, Severity};
use crate::version::{version_in_range, Version, VersionRange};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reference {
    pub url: String,
    #[serde(default)]
    pub tags: Vec<String>,
}

/// Versions of one library affected by a vulnerability.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Affected {
    pub library: LibraryId,
    #[serde(default)]
    pub ranges: Vec<VersionRange>,
    #[serde(default)]
    pub exact_versions: Vec<Version>,
}

impl Affected {
    pub fn contains(&self, version: &Version) -> bool {
        self.exact_versions.contains(version) || version_in_range(version, &self.ranges)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnRecord {
    pub id: String,
    pub description: String,
    pub severity: Severity,
    /// Publication time, UTC seconds.
    pub published: i64,
    #[serde(default)]
    pub references: Vec<Reference>,
    #[serde(default)]
    pub affected: Vec<Affected>,
}

impl VulnRecord {
    pub fn affects(&self, library: &LibraryId, version: &Version) -> bool {
        self.affected
            .iter()
            .any(|a| &a.library == library && a.contains(version))
    }
}
