//! NVD JSON 1.1 feed import.

use std::collections::{BTreeMap, HashMap, HashSet};

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde_json::Value;

use crate::diagnostics::{Warning, WarningKind};
use crate::model::{LibraryId, Severity};
use crate::version::{parse_version, Version, VersionRange};
use crate::vuln::{Affected, Reference, VulnRecord};

use super::IngestError;

/// Result of importing one feed document.
#[derive(Debug, Clone, PartialEq)]
pub struct NvdImport {
    pub records: Vec<VulnRecord>,
    /// Items dropped because none of their products is mapped.
    pub dropped_unmapped: usize,
    pub warnings: Vec<Warning>,
}

/// Splits a CPE 2.3 formatted string on unescaped colons.
fn cpe_fields(uri: &str) -> Vec<String> {
    let mut fields = Vec::new();
    let mut current = String::new();
    let mut chars = uri.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => {
                if let Some(next) = chars.next() {
                    current.push(next);
                }
            }
            ':' => fields.push(std::mem::take(&mut current)),
            _ => current.push(c),
        }
    }
    fields.push(current);
    fields
}

fn parse_timestamp(text: &str) -> Option<i64> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.timestamp());
    }
    let trimmed = text.trim_end_matches('Z');
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(trimmed, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(trimmed, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

/// CVSS v3 severity, falling back to banding the v2 base score.
fn severity_of(item: &Value) -> Severity {
    let v3 = item.pointer("/impact/baseMetricV3/cvssV3");
    if let Some(sev) = v3
        .and_then(|c| c.get("baseSeverity"))
        .and_then(Value::as_str)
        .and_then(|s| s.parse::<Severity>().ok())
    {
        if sev != Severity::Unknown {
            return sev;
        }
    }
    if let Some(score) = v3.and_then(|c| c.get("baseScore")).and_then(Value::as_f64) {
        return Severity::from_cvss_score(score);
    }
    item.pointer("/impact/baseMetricV2/cvssV2/baseScore")
        .and_then(Value::as_f64)
        .map_or(Severity::Unknown, Severity::from_cvss_score)
}

fn collect_cpe_matches<'a>(node: &'a Value, out: &mut Vec<&'a Value>) {
    if let Some(matches) = node.get("cpe_match").and_then(Value::as_array) {
        out.extend(matches.iter());
    }
    if let Some(children) = node.get("children").and_then(Value::as_array) {
        for child in children {
            collect_cpe_matches(child, out);
        }
    }
}

enum Bound {
    Range(VersionRange),
    Exact(Version),
}

fn bound_of(cpe: &Value, fields: &[String]) -> Result<Bound, String> {
    let bound = |key: &str| -> Result<Option<Version>, String> {
        match cpe.get(key).and_then(Value::as_str) {
            None => Ok(None),
            Some(text) => parse_version(text).map(Some).map_err(|e| e.to_string()),
        }
    };
    let start_incl = bound("versionStartIncluding")?;
    let start_excl = bound("versionStartExcluding")?;
    let end_incl = bound("versionEndIncluding")?;
    let end_excl = bound("versionEndExcluding")?;
    if start_incl.is_some() || start_excl.is_some() || end_incl.is_some() || end_excl.is_some() {
        let range = VersionRange {
            start_inclusive: start_incl.is_some(),
            start: start_incl.or(start_excl),
            end_inclusive: end_incl.is_some(),
            end: end_incl.or(end_excl),
        };
        if !range.is_well_formed() {
            return Err("start bound above end bound".into());
        }
        return Ok(Bound::Range(range));
    }
    let version = fields.get(5).map(String::as_str).unwrap_or("*");
    let update = fields.get(6).map(String::as_str).unwrap_or("*");
    match version {
        "*" | "-" | "" => Ok(Bound::Range(VersionRange::unbounded())),
        v => {
            let text = if update == "*" || update == "-" || update.is_empty() {
                v.to_string()
            } else {
                format!("{v}-{update}")
            };
            parse_version(&text).map(Bound::Exact).map_err(|e| e.to_string())
        }
    }
}

/// Imports an NVD 1.1 feed, keeping only products present in `mapping`.
///
/// Mapping keys are `vendor:product` or a bare `product`, matched
/// case-insensitively against each CPE. Items with products but none mapped
/// are dropped and counted; items without any product are kept with an
/// empty `affected` list.
pub fn import_nvd_feed(text: &str, mapping: &[(String, LibraryId)]) -> Result<NvdImport, IngestError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| IngestError::MalformedFeed(e.to_string()))?;
    let items = doc
        .get("CVE_Items")
        .and_then(Value::as_array)
        .ok_or_else(|| IngestError::MalformedFeed("missing CVE_Items array".into()))?;
    let lookup: HashMap<String, &LibraryId> = mapping
        .iter()
        .map(|(key, lib)| (key.trim().to_lowercase(), lib))
        .collect();

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    let mut dropped_unmapped = 0;
    let mut warnings = Vec::new();

    for (idx, item) in items.iter().enumerate() {
        let Some(id) = item.pointer("/cve/CVE_data_meta/ID").and_then(Value::as_str) else {
            warnings.push(Warning::new(
                WarningKind::MalformedLine,
                format!("CVE item #{idx} has no ID; skipped"),
            ));
            continue;
        };
        if !seen.insert(id.to_string()) {
            warnings.push(Warning::new(
                WarningKind::DuplicateRecord,
                format!("{id} appears twice; keeping the first"),
            ));
            continue;
        }

        let mut cpes = Vec::new();
        if let Some(nodes) = item.pointer("/configurations/nodes").and_then(Value::as_array) {
            for node in nodes {
                collect_cpe_matches(node, &mut cpes);
            }
        }
        let mut product_count = 0;
        let mut affected: BTreeMap<LibraryId, Affected> = BTreeMap::new();
        for cpe in cpes {
            if cpe.get("vulnerable").and_then(Value::as_bool) == Some(false) {
                continue;
            }
            let Some(uri) = cpe
                .get("cpe23Uri")
                .or_else(|| cpe.get("criteria"))
                .and_then(Value::as_str)
            else {
                continue;
            };
            let fields = cpe_fields(uri);
            if fields.len() < 5 {
                warnings.push(Warning::new(
                    WarningKind::MalformedLine,
                    format!("{id}: malformed CPE {uri:?}"),
                ));
                continue;
            }
            product_count += 1;
            let (vendor, product) = (fields[3].to_lowercase(), fields[4].to_lowercase());
            let Some(library) = lookup
                .get(&format!("{vendor}:{product}"))
                .or_else(|| lookup.get(&product))
            else {
                continue;
            };
            let entry = affected.entry((*library).clone()).or_insert_with(|| Affected {
                library: (*library).clone(),
                ranges: Vec::new(),
                exact_versions: Vec::new(),
            });
            match bound_of(cpe, &fields) {
                Ok(Bound::Range(r)) => {
                    if !entry.ranges.contains(&r) {
                        entry.ranges.push(r);
                    }
                }
                Ok(Bound::Exact(v)) => {
                    if !entry.exact_versions.contains(&v) {
                        entry.exact_versions.push(v);
                    }
                }
                Err(msg) => warnings.push(Warning::new(
                    WarningKind::UnparseableVersion,
                    format!("{id}: {uri}: {msg}"),
                )),
            }
        }
        if product_count > 0 && affected.is_empty() {
            dropped_unmapped += 1;
            continue;
        }

        let description = item
            .pointer("/cve/description/description_data")
            .and_then(Value::as_array)
            .and_then(|data| {
                data.iter()
                    .find(|d| d.get("lang").and_then(Value::as_str) == Some("en"))
                    .or_else(|| data.first())
            })
            .and_then(|d| d.get("value"))
            .and_then(Value::as_str)
            .unwrap_or_default()
            .to_string();
        let references = item
            .pointer("/cve/references/reference_data")
            .and_then(Value::as_array)
            .map(|refs| {
                refs.iter()
                    .filter_map(|r| {
                        let url = r.get("url")?.as_str()?.to_string();
                        let tags = r
                            .get("tags")
                            .and_then(Value::as_array)
                            .map(|t| t.iter().filter_map(|s| s.as_str().map(str::to_string)).collect())
                            .unwrap_or_default();
                        Some(Reference { url, tags })
                    })
                    .collect()
            })
            .unwrap_or_default();
        let published = item
            .get("publishedDate")
            .and_then(Value::as_str)
            .and_then(parse_timestamp)
            .unwrap_or(0);

        records.push(VulnRecord {
            id: id.to_string(),
            description,
            severity: severity_of(item),
            published,
            references,
            affected: affected.into_values().collect(),
        });
    }
    if dropped_unmapped > 0 {
        warnings.push(Warning::new(
            WarningKind::UnmappedProduct,
            format!("{dropped_unmapped} feed items dropped: no mapped product"),
        ));
    }
    Ok(NvdImport {
        records,
        dropped_unmapped,
        warnings,
    })
}
