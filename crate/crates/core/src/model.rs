//! Identifiers and enumerations shared across the crate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::version::Version;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IdError {
    #[error("empty library identifier")]
    Empty,
}

/// Canonical library key.
///
/// Repository-backed libraries are keyed `host/owner/repo`, lowercased, with
/// scheme and `.git` stripped. GitHub is the default host and is omitted,
/// so `https://github.com/Quick/Nimble.git` becomes `quick/nimble`.
/// Libraries known only by package-manager name keep that name lowercased.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LibraryId(String);

const DEFAULT_HOST: &str = "github.com";

impl LibraryId {
    /// Normalizes an already-canonical or plain name.
    pub fn new(name: &str) -> Result<Self, IdError> {
        let canonical = name.trim().trim_matches('/').to_lowercase();
        if canonical.is_empty() {
            return Err(IdError::Empty);
        }
        Ok(LibraryId(canonical))
    }

    /// Canonicalizes a repository location: URL, scp-style git address or
    /// bare `owner/repo`.
    pub fn from_repository_url(url: &str) -> Result<Self, IdError> {
        let mut rest = url.trim();
        if let Some(idx) = rest.find("://") {
            rest = &rest[idx + 3..];
        } else if let Some((user_host, path)) = rest.split_once(':') {
            // git@github.com:owner/repo.git
            if user_host.contains('@') && !path.starts_with('/') {
                let host = user_host.rsplit('@').next().unwrap_or(user_host);
                return Self::from_host_path(host, path);
            }
        }
        // drop credentials
        if let Some((creds, tail)) = rest.split_once('@') {
            if !creds.contains('/') {
                rest = tail;
            }
        }
        match rest.split_once('/') {
            Some((host, path)) if host.contains('.') || host.contains(':') => Self::from_host_path(host, path),
            _ => Self::from_host_path(DEFAULT_HOST, rest),
        }
    }

    fn from_host_path(host: &str, path: &str) -> Result<Self, IdError> {
        let host = host.split(':').next().unwrap_or(host).to_lowercase();
        let host = host.strip_prefix("www.").unwrap_or(&host).to_string();
        let path = path.trim().trim_end_matches('/');
        let path = path.strip_suffix(".git").unwrap_or(path);
        let path = path.trim_matches('/');
        if path.is_empty() {
            return Self::new(&host);
        }
        if host == DEFAULT_HOST {
            Self::new(path)
        } else {
            Self::new(&format!("{host}/{path}"))
        }
    }

    /// CocoaPods pod name with any subspec suffix collapsed to the root pod.
    pub fn from_pod_name(name: &str) -> Result<Self, IdError> {
        let root = name.trim().trim_matches('"').split('/').next().unwrap_or("");
        Self::new(root)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LibraryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for LibraryId {
    type Err = IdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LibraryId::new(s)
    }
}

impl Serialize for LibraryId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for LibraryId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        LibraryId::new(&text).map_err(serde::de::Error::custom)
    }
}

/// A (library, version) pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VersionRef {
    pub library: LibraryId,
    pub version: Version,
}

impl VersionRef {
    pub fn new(library: LibraryId, version: Version) -> Self {
        VersionRef { library, version }
    }
}

impl fmt::Display for VersionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.library, self.version)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Critical,
    High,
    Medium,
    Low,
    Unknown,
}

impl Severity {
    /// The four scored bands, most severe first.
    pub const SCORED: [Severity; 4] = [Severity::Critical, Severity::High, Severity::Medium, Severity::Low];

    /// CVSS v3 qualitative bands. A score of 0.0 ("None") has no band.
    pub fn from_cvss_score(score: f64) -> Severity {
        match score {
            s if s >= 9.0 => Severity::Critical,
            s if s >= 7.0 => Severity::High,
            s if s >= 4.0 => Severity::Medium,
            s if s > 0.0 => Severity::Low,
            _ => Severity::Unknown,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::Critical => "CRITICAL",
            Severity::High => "HIGH",
            Severity::Medium => "MEDIUM",
            Severity::Low => "LOW",
            Severity::Unknown => "UNKNOWN",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Severity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "CRITICAL" => Ok(Severity::Critical),
            "HIGH" => Ok(Severity::High),
            "MEDIUM" => Ok(Severity::Medium),
            "LOW" => Ok(Severity::Low),
            "UNKNOWN" | "NONE" | "" => Ok(Severity::Unknown),
            other => Err(format!("unknown severity {other:?}")),
        }
    }
}

/// Where a dependency edge's exact version came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Provenance {
    /// Pinned by a package-manager resolution file.
    #[serde(rename = "lockfile")]
    Lockfile,
    /// Resolved here from manifest constraints.
    #[serde(rename = "manifest")]
    ManifestResolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PackageManager {
    CocoaPods,
    Carthage,
    SwiftPM,
}

impl fmt::Display for PackageManager {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PackageManager::CocoaPods => "cocoapods",
            PackageManager::Carthage => "carthage",
            PackageManager::SwiftPM => "swiftpm",
        })
    }
}

impl FromStr for PackageManager {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cocoapods" | "pods" => Ok(PackageManager::CocoaPods),
            "carthage" => Ok(PackageManager::Carthage),
            "swiftpm" | "spm" | "swift" => Ok(PackageManager::SwiftPM),
            other => Err(format!("unknown package manager {other:?}")),
        }
    }
}
