//! Lenient semantic versions and version ranges.
//!
//! Git tags in the Swift ecosystems are loosely shaped: `v1.2`, `2.0.0-rc1`,
//! `4.1.0.2`. Parsing accepts all of these, orders them totally, and keeps
//! the original text around so nothing is lost on a round-trip.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VersionError {
    #[error("malformed version {0:?}: no leading numeric component")]
    MalformedVersion(String),
}

/// A parsed version label.
///
/// Equality, hashing and ordering ignore `raw`: `1.0` and `1.0.0` are the
/// same version.
#[derive(Debug, Clone)]
pub struct Version {
    pub major: u64,
    pub minor: u64,
    pub patch: u64,
    /// Numeric components beyond patch (`1.2.3.4` has `extra == [4]`).
    pub extra: Vec<u64>,
    pub prerelease: Option<String>,
    pub raw: String,
}

impl Version {
    /// Builds a plain `major.minor.patch` version.
    pub fn new(major: u64, minor: u64, patch: u64) -> Self {
        Version {
            major,
            minor,
            patch,
            extra: Vec::new(),
            prerelease: None,
            raw: format!("{major}.{minor}.{patch}"),
        }
    }

    pub fn zero() -> Self {
        Version::new(0, 0, 0)
    }

    pub fn parse(text: &str) -> Result<Self, VersionError> {
        parse_version(text)
    }

    pub fn is_prerelease(&self) -> bool {
        self.prerelease.is_some()
    }

    /// Numeric components with trailing zeros beyond patch removed.
    fn numeric(&self) -> impl Iterator<Item = u64> + '_ {
        let extra_len = self.extra.iter().rposition(|&c| c != 0).map_or(0, |i| i + 1);
        [self.major, self.minor, self.patch]
            .into_iter()
            .chain(self.extra[..extra_len].iter().copied())
    }

    /// Renders `major.minor.patch[.extra..][-prerelease]`.
    pub fn canonical(&self) -> String {
        let mut out = format!("{}.{}.{}", self.major, self.minor, self.patch);
        for c in &self.extra {
            out.push('.');
            out.push_str(&c.to_string());
        }
        if let Some(pre) = &self.prerelease {
            out.push('-');
            out.push_str(pre);
        }
        out
    }

    /// Number of numeric components spelled out in `raw` (at least one).
    pub fn written_components(&self) -> usize {
        let core = strip_prefix(self.raw.trim());
        let core = core.split(['-', '+']).next().unwrap_or("");
        core.split('.').count().max(1)
    }

    /// The smallest version of the next major line (`1.4.2` -> `2.0.0`).
    pub fn next_major(&self) -> Version {
        Version::new(self.major + 1, 0, 0)
    }

    /// The smallest version of the next minor line (`1.4.2` -> `1.5.0`).
    pub fn next_minor(&self) -> Version {
        Version::new(self.major, self.minor + 1, 0)
    }
}

fn strip_prefix(text: &str) -> &str {
    for prefix in ["version", "Version", "VERSION", "v", "V"] {
        if let Some(rest) = text.strip_prefix(prefix) {
            if rest.starts_with(|c: char| c.is_ascii_digit()) {
                return rest;
            }
        }
    }
    text
}

/// Parses a lenient semantic version.
///
/// A leading `v` (or `version`) is dropped, missing components default to
/// zero, and anything after the first `-` is the prerelease. Build metadata
/// after `+` is ignored for ordering but preserved in `raw`.
pub fn parse_version(text: &str) -> Result<Version, VersionError> {
    let malformed = || VersionError::MalformedVersion(text.to_string());
    let trimmed = text.trim();
    let body = strip_prefix(trimmed);
    let body = body.split('+').next().unwrap_or("");
    let (core, prerelease) = match body.split_once('-') {
        Some((core, pre)) => (core, Some(pre)),
        None => (body, None),
    };
    if let Some(pre) = prerelease {
        if pre.is_empty() || pre.split('.').any(str::is_empty) {
            return Err(malformed());
        }
    }

    let mut components = Vec::new();
    for part in core.split('.') {
        if part.is_empty() || !part.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed());
        }
        components.push(part.parse::<u64>().map_err(|_| malformed())?);
    }
    let get = |i: usize| components.get(i).copied().unwrap_or(0);
    Ok(Version {
        major: get(0),
        minor: get(1),
        patch: get(2),
        extra: components.iter().skip(3).copied().collect(),
        prerelease: prerelease.map(str::to_string),
        raw: trimmed.to_string(),
    })
}

fn compare_prerelease(a: &str, b: &str) -> Ordering {
    let mut left = a.split('.');
    let mut right = b.split('.');
    loop {
        match (left.next(), right.next()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) => {
                let ord = match (x.parse::<u64>(), y.parse::<u64>()) {
                    (Ok(nx), Ok(ny)) => nx.cmp(&ny),
                    // numeric identifiers sort before alphanumeric ones
                    (Ok(_), Err(_)) => Ordering::Less,
                    (Err(_), Ok(_)) => Ordering::Greater,
                    (Err(_), Err(_)) => x.cmp(y),
                };
                if ord != Ordering::Equal {
                    return ord;
                }
            }
        }
    }
}

pub fn compare_versions(a: &Version, b: &Version) -> Ordering {
    let mut left = a.numeric();
    let mut right = b.numeric();
    loop {
        match (left.next(), right.next()) {
            (None, None) => break,
            (x, y) => {
                let ord = x.unwrap_or(0).cmp(&y.unwrap_or(0));
                if ord != Ordering::Equal {
                    return ord;
                }
            }
        }
    }
    match (&a.prerelease, &b.prerelease) {
        (None, None) => Ordering::Equal,
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (Some(x), Some(y)) => compare_prerelease(x, y),
    }
}

impl Ord for Version {
    fn cmp(&self, other: &Self) -> Ordering {
        compare_versions(self, other)
    }
}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Version {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Version {}

impl Hash for Version {
    fn hash<H: Hasher>(&self, state: &mut H) {
        for c in self.numeric() {
            c.hash(state);
        }
        self.prerelease.hash(state);
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl FromStr for Version {
    type Err = VersionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_version(s)
    }
}

impl Serialize for Version {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for Version {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_version(&text).map_err(serde::de::Error::custom)
    }
}

/// An interval of versions; a missing bound is unbounded on that side.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VersionRange {
    pub start: Option<Version>,
    pub start_inclusive: bool,
    pub end: Option<Version>,
    pub end_inclusive: bool,
}

impl VersionRange {
    pub fn unbounded() -> Self {
        VersionRange {
            start: None,
            start_inclusive: false,
            end: None,
            end_inclusive: false,
        }
    }

    /// `[start, end)`
    pub fn half_open(start: Version, end: Version) -> Self {
        VersionRange {
            start: Some(start),
            start_inclusive: true,
            end: Some(end),
            end_inclusive: false,
        }
    }

    pub fn at_most(end: Version) -> Self {
        VersionRange {
            end: Some(end),
            end_inclusive: true,
            ..VersionRange::unbounded()
        }
    }

    pub fn below(end: Version) -> Self {
        VersionRange {
            end: Some(end),
            end_inclusive: false,
            ..VersionRange::unbounded()
        }
    }

    pub fn at_least(start: Version) -> Self {
        VersionRange {
            start: Some(start),
            start_inclusive: true,
            ..VersionRange::unbounded()
        }
    }

    /// False when both bounds are present and start > end.
    pub fn is_well_formed(&self) -> bool {
        match (&self.start, &self.end) {
            (Some(s), Some(e)) => s <= e,
            _ => true,
        }
    }

    pub fn contains(&self, v: &Version) -> bool {
        let above_start = match &self.start {
            None => true,
            Some(s) if self.start_inclusive => v >= s,
            Some(s) => v > s,
        };
        let below_end = match &self.end {
            None => true,
            Some(e) if self.end_inclusive => v <= e,
            Some(e) => v < e,
        };
        above_start && below_end
    }
}

/// True iff `v` lies in at least one of `ranges`.
pub fn version_in_range(v: &Version, ranges: &[VersionRange]) -> bool {
    ranges.iter().any(|r| r.contains(v))
}
