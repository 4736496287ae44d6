use std::fmt::Write as _;

use crate::diagnostics::{Parsed, Warning, WarningKind};
use crate::model::LibraryId;
use crate::version::parse_version;

use super::{IngestError, ResolvedEntry, ResolvedManifest, SourceKind};

fn indent_of(line: &str) -> usize {
    line.len() - line.trim_start().len()
}

fn unquote(text: &str) -> &str {
    let t = text.trim();
    t.strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .or_else(|| t.strip_prefix('\'').and_then(|s| s.strip_suffix('\'')))
        .unwrap_or(t)
        .trim()
}

/// Splits `Name (requirement)` into the name and the parenthesized part.
fn split_name(item: &str) -> (&str, Option<&str>) {
    match item.find(" (").or_else(|| item.find('(')) {
        Some(open) => {
            let name = item[..open].trim();
            let rest = &item[open..];
            let inner = rest
                .trim()
                .strip_prefix('(')
                .map(|s| s.strip_suffix(')').unwrap_or(s).trim());
            (name, inner)
        }
        None => (item.trim(), None),
    }
}

/// Parses the `PODS:` section of a Podfile.lock.
///
/// Top-level items become entries, nested items their dependencies.
/// Subspecs collapse to their root pod; other sections are ignored.
pub fn parse_podfile_lock(text: &str) -> Result<Parsed<ResolvedManifest>, IngestError> {
    let lines: Vec<&str> = text.lines().collect();
    let header = lines
        .iter()
        .position(|l| l.trim() == "PODS:")
        .ok_or_else(|| IngestError::MalformedLockfile("no PODS section".into()))?;
    let header_indent = indent_of(lines[header]);

    let mut manifest = ResolvedManifest::new(SourceKind::CocoapodsLock);
    let mut warnings = Vec::new();
    let mut entry_indent: Option<usize> = None;
    // index into manifest.entries of the item receiving nested deps
    let mut current: Option<usize> = None;

    for (offset, line) in lines.iter().enumerate().skip(header + 1) {
        let lineno = offset + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let indent = indent_of(line);
        let Some(item) = trimmed.strip_prefix('-') else {
            if indent <= header_indent {
                break;
            }
            warnings.push(Warning::at_line(
                WarningKind::MalformedLine,
                lineno,
                format!("unexpected line in PODS section: {trimmed:?}"),
            ));
            continue;
        };
        if indent < header_indent {
            break;
        }
        let item = unquote(item.trim().trim_end_matches(':'));
        let level = *entry_indent.get_or_insert(indent);

        if indent <= level {
            current = None;
            let (name, version_text) = split_name(item);
            let library = match LibraryId::from_pod_name(name) {
                Ok(id) => id,
                Err(_) => {
                    warnings.push(Warning::at_line(
                        WarningKind::MalformedLine,
                        lineno,
                        format!("entry without a pod name: {item:?}"),
                    ));
                    continue;
                }
            };
            let Some(version_text) = version_text else {
                warnings.push(Warning::at_line(
                    WarningKind::UnparseableVersion,
                    lineno,
                    format!("entry {name:?} has no version"),
                ));
                continue;
            };
            let version = match parse_version(version_text) {
                Ok(v) => v,
                Err(e) => {
                    warnings.push(Warning::at_line(
                        WarningKind::UnparseableVersion,
                        lineno,
                        format!("skipping {name}: {e}"),
                    ));
                    continue;
                }
            };
            match manifest.entries.iter().position(|e| e.library == library) {
                Some(idx) if manifest.entries[idx].version == version => current = Some(idx),
                Some(idx) => warnings.push(Warning::at_line(
                    WarningKind::DuplicateEntry,
                    lineno,
                    format!(
                        "{library} pinned at {version} after {}; keeping the first",
                        manifest.entries[idx].version
                    ),
                )),
                None => {
                    manifest.entries.push(ResolvedEntry {
                        library,
                        version,
                        deps: Vec::new(),
                    });
                    current = Some(manifest.entries.len() - 1);
                }
            }
        } else if let Some(idx) = current {
            let (name, _) = split_name(item);
            match LibraryId::from_pod_name(name) {
                Ok(dep) => {
                    let entry = &mut manifest.entries[idx];
                    if dep != entry.library && !entry.deps.contains(&dep) {
                        entry.deps.push(dep);
                    }
                }
                Err(_) => warnings.push(Warning::at_line(
                    WarningKind::MalformedLine,
                    lineno,
                    format!("dependency without a name: {item:?}"),
                )),
            }
        }
    }
    Ok(Parsed::new(manifest, warnings))
}

/// Renders the `PODS:` section for a manifest.
pub fn render_podfile_lock(manifest: &ResolvedManifest) -> String {
    let mut out = String::from("PODS:\n");
    for entry in &manifest.entries {
        let colon = if entry.deps.is_empty() { "" } else { ":" };
        let _ = writeln!(out, "  - {} ({}){colon}", entry.library, entry.version);
        for dep in &entry.deps {
            let _ = writeln!(out, "    - {dep}");
        }
    }
    out
}
