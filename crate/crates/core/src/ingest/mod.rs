//! Parsers for package-manager files, vulnerability feeds and sidecars.
//!
//! Every parser is lenient: lines it does not understand are skipped and
//! reported as [`Warning`](crate::diagnostics::Warning)s rather than
//! aborting the file.

mod cartfile;
mod manifest;
mod metadata;
mod nvd;
mod package_resolved;
mod podfile_lock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{LibraryId, PackageManager};
use crate::version::Version;

pub use cartfile::{parse_cartfile_resolved, render_cartfile_resolved};
pub use manifest::parse_manifest_requirements;
pub use metadata::{load_library_metadata, load_product_mapping, LibraryMeta, ProductMapping};
pub use nvd::{import_nvd_feed, NvdImport};
pub use package_resolved::{parse_package_resolved, render_package_resolved};
pub use podfile_lock::{parse_podfile_lock, render_podfile_lock};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IngestError {
    #[error("malformed lockfile: {0}")]
    MalformedLockfile(String),
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("unsupported Package.resolved format version {0}")]
    UnsupportedFormatVersion(i64),
    #[error("malformed manifest: no dependency declarations found")]
    MalformedManifest,
    #[error("malformed vulnerability feed: {0}")]
    MalformedFeed(String),
    #[error("malformed record at line {line}: {message}")]
    MalformedRecord { line: usize, message: String },
}

/// Which file a manifest or resolution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    CocoapodsLock,
    CarthageResolved,
    SwiftpmResolved,
    Podfile,
    Cartfile,
    PackageSwift,
}

impl SourceKind {
    pub fn package_manager(self) -> PackageManager {
        match self {
            SourceKind::CocoapodsLock | SourceKind::Podfile => PackageManager::CocoaPods,
            SourceKind::CarthageResolved | SourceKind::Cartfile => PackageManager::Carthage,
            SourceKind::SwiftpmResolved | SourceKind::PackageSwift => PackageManager::SwiftPM,
        }
    }

    /// Resolution files that list every installed library without nesting.
    pub fn is_flat(self) -> bool {
        matches!(self, SourceKind::CarthageResolved | SourceKind::SwiftpmResolved)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedEntry {
    pub library: LibraryId,
    pub version: Version,
    pub deps: Vec<LibraryId>,
}

/// The exact versions pinned by one resolution file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolvedManifest {
    pub source_kind: SourceKind,
    pub entries: Vec<ResolvedEntry>,
}

impl ResolvedManifest {
    pub fn new(source_kind: SourceKind) -> Self {
        ResolvedManifest {
            source_kind,
            entries: Vec::new(),
        }
    }

    pub fn entry(&self, library: &LibraryId) -> Option<&ResolvedEntry> {
        self.entries.iter().find(|e| &e.library == library)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ConstraintKind {
    Exact,
    Optimistic,
    AtLeast,
    LessThan,
    Range,
    Unresolvable,
}

/// A version requirement from a manifest.
///
/// Upper bounds are exclusive unless stated otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    Exact {
        version: Version,
    },
    /// `~>`: at least `low`, below `high`.
    Optimistic {
        low: Version,
        high: Version,
    },
    AtLeast {
        version: Version,
    },
    /// Swift PM `from:` / `.upToNextMajor(from:)`: at least `version`,
    /// below the next major.
    UpToNextMajor {
        version: Version,
    },
    LessThan {
        version: Version,
    },
    Range {
        low: Version,
        high: Version,
        high_inclusive: bool,
    },
    /// Branch, revision or path pins.
    Unresolvable,
}

impl Constraint {
    pub fn at_least_zero() -> Self {
        Constraint::AtLeast {
            version: Version::zero(),
        }
    }

    /// The `~>` operator: bumps the second-to-last written component, so
    /// `~> 1.2` allows `< 2.0` and `~> 1.2.3` allows `< 1.3`.
    pub fn optimistic(base: Version) -> Self {
        let written = base.written_components();
        let mut parts = vec![base.major, base.minor, base.patch];
        parts.extend(base.extra.iter().copied());
        parts.resize(written.max(3), 0);
        let bump_at = written.saturating_sub(2);
        parts[bump_at] += 1;
        for p in parts.iter_mut().skip(bump_at + 1) {
            *p = 0;
        }
        let raw = parts[..written.max(bump_at + 1)]
            .iter()
            .map(u64::to_string)
            .collect::<Vec<_>>()
            .join(".");
        let high = Version {
            major: parts[0],
            minor: parts[1],
            patch: parts[2],
            extra: parts[3..].iter().copied().filter(|_| written > 3).collect(),
            prerelease: None,
            raw,
        };
        Constraint::Optimistic { low: base, high }
    }

    pub fn kind(&self) -> ConstraintKind {
        match self {
            Constraint::Exact { .. } => ConstraintKind::Exact,
            Constraint::Optimistic { .. } => ConstraintKind::Optimistic,
            Constraint::AtLeast { .. } | Constraint::UpToNextMajor { .. } => ConstraintKind::AtLeast,
            Constraint::LessThan { .. } => ConstraintKind::LessThan,
            Constraint::Range { .. } => ConstraintKind::Range,
            Constraint::Unresolvable => ConstraintKind::Unresolvable,
        }
    }

    pub fn allows(&self, v: &Version) -> bool {
        match self {
            Constraint::Exact { version } => v == version,
            Constraint::Optimistic { low, high } => v >= low && v < high,
            Constraint::AtLeast { version } => v >= version,
            Constraint::UpToNextMajor { version } => v >= version && *v < version.next_major(),
            Constraint::LessThan { version } => v < version,
            Constraint::Range {
                low,
                high,
                high_inclusive,
            } => v >= low && if *high_inclusive { v <= high } else { v < high },
            Constraint::Unresolvable => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Requirement {
    pub library: LibraryId,
    pub constraint: Constraint,
}

/// Requirements declared by one manifest file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequirementSet {
    pub source_kind: SourceKind,
    pub requirements: Vec<Requirement>,
}

fn is_commit_hash(tag: &str) -> bool {
    tag.len() == 40 && tag.bytes().all(|b| b.is_ascii_hexdigit())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Version {
        Version::parse(s).unwrap()
    }

    #[test]
    fn optimistic_bumps_second_to_last_component() {
        let c = Constraint::optimistic(v("1.2"));
        assert!(c.allows(&v("1.2.0")));
        assert!(c.allows(&v("1.9.0")));
        assert!(!c.allows(&v("2.0.0")));
        assert!(!c.allows(&v("1.1.9")));

        let c = Constraint::optimistic(v("1.2.3"));
        assert!(c.allows(&v("1.2.9")));
        assert!(!c.allows(&v("1.3.0")));

        let c = Constraint::optimistic(v("3"));
        assert!(c.allows(&v("3.5")));
        assert!(!c.allows(&v("4.0")));

        let c = Constraint::optimistic(v("1.2.3.4"));
        assert!(c.allows(&v("1.2.3.9")));
        assert!(!c.allows(&v("1.2.4")));
    }

    #[test]
    fn up_to_next_major_caps() {
        let c = Constraint::UpToNextMajor { version: v("1.2.0") };
        assert_eq!(c.kind(), ConstraintKind::AtLeast);
        assert!(c.allows(&v("1.9.9")));
        assert!(!c.allows(&v("2.0.0")));
        assert!(!c.allows(&v("1.1.0")));
    }
}
