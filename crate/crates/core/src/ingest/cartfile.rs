use std::fmt::Write as _;
use std::sync::OnceLock;

use regex::Regex;

use crate::diagnostics::{Parsed, Warning, WarningKind};
use crate::model::LibraryId;
use crate::version::parse_version;

use super::{is_commit_hash, ResolvedEntry, ResolvedManifest, SourceKind};

fn line_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"^(github|git|binary)\s+"([^"]*)"\s+"([^"]*)"\s*(?:#.*)?$"#).unwrap())
}

/// Parses a Cartfile.resolved. The format is flat, so entries carry no deps.
///
/// Lines that do not parse are reported and skipped; the rest of the file
/// is still read.
pub fn parse_cartfile_resolved(text: &str) -> Parsed<ResolvedManifest> {
    let mut manifest = ResolvedManifest::new(SourceKind::CarthageResolved);
    let mut warnings = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some(caps) = line_pattern().captures(trimmed) else {
            warnings.push(Warning::at_line(
                WarningKind::MalformedLine,
                lineno,
                format!("unrecognized line {trimmed:?}"),
            ));
            continue;
        };
        let (origin, location, tag) = (&caps[1], &caps[2], &caps[3]);
        if origin == "binary" {
            warnings.push(Warning::at_line(
                WarningKind::UnsupportedEntry,
                lineno,
                format!("binary framework {location:?} skipped"),
            ));
            continue;
        }
        let library = match LibraryId::from_repository_url(location) {
            Ok(id) => id,
            Err(_) => {
                warnings.push(Warning::at_line(
                    WarningKind::MalformedLine,
                    lineno,
                    "empty repository location",
                ));
                continue;
            }
        };
        if is_commit_hash(tag) {
            warnings.push(Warning::at_line(
                WarningKind::UnversionedPin,
                lineno,
                format!("{library} pinned to commit {tag}; skipped"),
            ));
            continue;
        }
        let version = match parse_version(tag) {
            Ok(v) => v,
            Err(_) => {
                warnings.push(Warning::at_line(
                    WarningKind::UnversionedPin,
                    lineno,
                    format!("{library} pinned to non-version tag {tag:?}; skipped"),
                ));
                continue;
            }
        };
        if manifest.entry(&library).is_some() {
            warnings.push(Warning::at_line(
                WarningKind::DuplicateEntry,
                lineno,
                format!("{library} listed twice; keeping the first"),
            ));
            continue;
        }
        manifest.entries.push(ResolvedEntry {
            library,
            version,
            deps: Vec::new(),
        });
    }
    Parsed::new(manifest, warnings)
}

/// Renders entries as `github`/`git` lines. Ids with a host segment use the
/// `git` form.
pub fn render_cartfile_resolved(manifest: &ResolvedManifest) -> String {
    let mut out = String::new();
    for entry in &manifest.entries {
        let id = entry.library.as_str();
        let host_first = id.split('/').next().is_some_and(|h| h.contains('.'));
        if host_first {
            let _ = writeln!(out, "git \"https://{id}\" \"{}\"", entry.version);
        } else {
            let _ = writeln!(out, "github \"{id}\" \"{}\"", entry.version);
        }
    }
    out
}
