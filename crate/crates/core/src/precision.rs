//! Heuristic grading of how precisely a vulnerability's public text points
//! at code: method, class, file, and patch links.
//!
//! Patterns live in a [`PatternSet`] that can be loaded from JSON. Patch
//! contents are scanned only when supplied; nothing is fetched.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::Graph;
use crate::vuln::VulnRecord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatternError {
    #[error("malformed pattern document: {0}")]
    Malformed(String),
    #[error("pattern {name} does not compile: {message}")]
    InvalidRegex { name: String, message: String },
    #[error("pattern name {0} is used twice")]
    DuplicateName(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternGroup {
    Method,
    Class,
    File,
    PatchUrl,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub name: String,
    pub regex: String,
}

/// Text field a match was found in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Field {
    Description,
    Patch,
    ReferenceUrl,
    ReferenceTag,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Evidence {
    pub group: PatternGroup,
    pub field: Field,
    pub matched_text: String,
    pub pattern_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionFlags {
    pub vuln_id: String,
    pub mentions_method: bool,
    pub mentions_class: bool,
    pub mentions_file: bool,
    pub has_patch_link: bool,
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Clone)]
struct Compiled {
    group: PatternGroup,
    name: String,
    regex: Regex,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PatternDoc {
    #[serde(default)]
    method: Vec<PatternSpec>,
    #[serde(default)]
    class: Vec<PatternSpec>,
    #[serde(default)]
    file: Vec<PatternSpec>,
    #[serde(default)]
    patch_url: Vec<PatternSpec>,
}

/// Named regular expressions grouped by what they detect.
#[derive(Debug, Clone)]
pub struct PatternSet {
    patterns: Vec<Compiled>,
}

const CAMEL: &str = r"[A-Z][A-Za-z0-9]*[a-z][A-Za-z0-9]*[A-Z][A-Za-z0-9]*";
const CODE_EXT: &str = r"(?:c|h|m|mm|swift|cpp|cc|hpp)";

fn default_specs() -> Vec<(PatternGroup, &'static str, String)> {
    use PatternGroup::*;
    vec![
        (
            Method,
            "call_parens",
            r"[A-Za-z_][A-Za-z0-9_]*(?:(?:::|\.|->)[A-Za-z_][A-Za-z0-9_]*)*\(\)".into(),
        ),
        (
            Method,
            "keyword_backticked",
            r"(?i:function|method)\s+`[A-Za-z_][A-Za-z0-9_:.]*`".into(),
        ),
        (
            Method,
            "identifier_then_keyword",
            r"\b(?:[A-Za-z][A-Za-z0-9]*_[A-Za-z0-9_]*|[a-z][a-z0-9]*[A-Z][A-Za-z0-9]*)\s+(?:function|method)s?\b"
                .into(),
        ),
        (
            Class,
            "keyword_identifier",
            r"\b(?:class|struct)\s+`?[A-Z][A-Za-z0-9_]*".into(),
        ),
        (
            Class,
            "camel_then_keyword",
            format!(r"\b{CAMEL}\s+(?:class|struct|protocol)\b"),
        ),
        (Class, "camel_backticked", format!(r"`{CAMEL}`")),
        (Class, "camel_member", format!(r"\b{CAMEL}(?:::|\.|->)[A-Za-z_]")),
        (
            File,
            "source_extension",
            format!(r"\b[A-Za-z0-9_][A-Za-z0-9_./-]*\.{CODE_EXT}\b"),
        ),
        (
            File,
            "path_with_extension",
            r"\b[A-Za-z0-9_.-]+(?:/[A-Za-z0-9_.-]+)+\.[A-Za-z][A-Za-z0-9]{0,4}\b".into(),
        ),
        (PatchUrl, "patch_tag", r"^(?i:patch)$".into()),
        (PatchUrl, "commit_url", r"/commits?/[0-9a-fA-F]{7,40}".into()),
        (PatchUrl, "diff_file", r"\.(?:patch|diff)(?:$|[?#])".into()),
        (
            PatchUrl,
            "cgit_commit",
            r"[?&;](?:id|h|a=commitdiff;h)=[0-9a-f]{7,40}".into(),
        ),
    ]
}

impl Default for PatternSet {
    fn default() -> Self {
        let specs = default_specs()
            .into_iter()
            .map(|(g, n, r)| {
                (
                    g,
                    PatternSpec {
                        name: n.into(),
                        regex: r,
                    },
                )
            })
            .collect();
        PatternSet::new(specs).expect("default patterns compile")
    }
}

impl PatternSet {
    pub fn new(specs: Vec<(PatternGroup, PatternSpec)>) -> Result<Self, PatternError> {
        let mut names = HashSet::new();
        let mut patterns = Vec::with_capacity(specs.len());
        for (group, spec) in specs {
            if !names.insert(spec.name.clone()) {
                return Err(PatternError::DuplicateName(spec.name));
            }
            let regex = Regex::new(&spec.regex).map_err(|e| PatternError::InvalidRegex {
                name: spec.name.clone(),
                message: e.to_string(),
            })?;
            patterns.push(Compiled {
                group,
                name: spec.name,
                regex,
            });
        }
        Ok(PatternSet { patterns })
    }

    /// Parses `{"method": [{"name", "regex"}], "class": [...], "file": [...], "patch_url": [...]}`.
    pub fn from_json(text: &str) -> Result<Self, PatternError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| PatternError::Malformed(e.to_string()))?;
        if !value.is_object() {
            return Err(PatternError::Malformed("expected an object of pattern groups".into()));
        }
        let doc: PatternDoc = serde_json::from_value(value).map_err(|e| PatternError::Malformed(e.to_string()))?;
        let tag = |g: PatternGroup, v: Vec<PatternSpec>| v.into_iter().map(move |s| (g, s));
        PatternSet::new(
            tag(PatternGroup::Method, doc.method)
                .chain(tag(PatternGroup::Class, doc.class))
                .chain(tag(PatternGroup::File, doc.file))
                .chain(tag(PatternGroup::PatchUrl, doc.patch_url))
                .collect(),
        )
    }

    pub fn to_json(&self) -> String {
        let mut doc = PatternDoc::default();
        for p in &self.patterns {
            let spec = PatternSpec {
                name: p.name.clone(),
                regex: p.regex.as_str().to_string(),
            };
            match p.group {
                PatternGroup::Method => doc.method.push(spec),
                PatternGroup::Class => doc.class.push(spec),
                PatternGroup::File => doc.file.push(spec),
                PatternGroup::PatchUrl => doc.patch_url.push(spec),
            }
        }
        serde_json::to_string_pretty(&doc).expect("pattern document serializes")
    }

    pub fn specs(&self) -> Vec<(PatternGroup, PatternSpec)> {
        self.patterns
            .iter()
            .map(|p| {
                (
                    p.group,
                    PatternSpec {
                        name: p.name.clone(),
                        regex: p.regex.as_str().to_string(),
                    },
                )
            })
            .collect()
    }

    /// The compiled pattern called `name`.
    pub fn pattern(&self, name: &str) -> Option<&Regex> {
        self.patterns.iter().find(|p| p.name == name).map(|p| &p.regex)
    }

    fn group(&self, group: PatternGroup) -> impl Iterator<Item = &Compiled> + '_ {
        self.patterns.iter().filter(move |p| p.group == group)
    }
}

fn collect(out: &mut Vec<Evidence>, p: &Compiled, field: Field, text: &str) {
    for m in p.regex.find_iter(text) {
        out.push(Evidence {
            group: p.group,
            field,
            matched_text: m.as_str().to_string(),
            pattern_name: p.name.clone(),
        });
    }
}

pub fn scan_vulnerability(vuln: &VulnRecord, patterns: &PatternSet) -> PrecisionFlags {
    scan_vulnerability_with_patch(vuln, None, patterns)
}

/// Like [`scan_vulnerability`], also scanning supplied patch text for
/// method, class and file mentions.
pub fn scan_vulnerability_with_patch(vuln: &VulnRecord, patch: Option<&str>, patterns: &PatternSet) -> PrecisionFlags {
    let mut evidence = Vec::new();
    for group in [PatternGroup::Method, PatternGroup::Class, PatternGroup::File] {
        for p in patterns.group(group) {
            collect(&mut evidence, p, Field::Description, &vuln.description);
            if let Some(patch) = patch {
                collect(&mut evidence, p, Field::Patch, patch);
            }
        }
    }
    for p in patterns.group(PatternGroup::PatchUrl) {
        for r in &vuln.references {
            collect(&mut evidence, p, Field::ReferenceUrl, &r.url);
            for tag in &r.tags {
                collect(&mut evidence, p, Field::ReferenceTag, tag);
            }
        }
    }
    evidence.sort();
    evidence.dedup();
    let has = |g: PatternGroup| evidence.iter().any(|e| e.group == g);
    PrecisionFlags {
        vuln_id: vuln.id.clone(),
        mentions_method: has(PatternGroup::Method),
        mentions_class: has(PatternGroup::Class),
        mentions_file: has(PatternGroup::File),
        has_patch_link: has(PatternGroup::PatchUrl),
        evidence,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrecisionRow {
    pub language: String,
    pub vulnerabilities: usize,
    pub method: usize,
    pub class: usize,
    pub both: usize,
    pub file: usize,
    pub patch_link: usize,
}

/// Languages a vulnerability is attributed to: those of the libraries it
/// matched, else of the libraries it names, else `UNKNOWN`.
pub fn vuln_languages(graph: &Graph, vuln_id: &str) -> BTreeSet<String> {
    let mut langs: BTreeSet<String> = graph
        .nodes_matched_by(vuln_id)
        .into_iter()
        .map(|n| graph.language_of(n).to_string())
        .collect();
    if langs.is_empty() {
        if let Some(v) = graph.vuln(vuln_id) {
            langs = v
                .affected
                .iter()
                .filter_map(|a| graph.library(&a.library))
                .map(|l| l.language_or_unknown().to_string())
                .collect();
        }
    }
    if langs.is_empty() {
        langs.insert("UNKNOWN".into());
    }
    langs
}

/// One row per language, sorted by language name.
pub fn precision_report(flags: &[PrecisionFlags], graph: &Graph) -> Vec<PrecisionRow> {
    let mut rows: BTreeMap<String, PrecisionRow> = BTreeMap::new();
    for f in flags {
        for lang in vuln_languages(graph, &f.vuln_id) {
            let row = rows.entry(lang.clone()).or_insert_with(|| PrecisionRow {
                language: lang,
                ..PrecisionRow::default()
            });
            row.vulnerabilities += 1;
            row.method += f.mentions_method as usize;
            row.class += f.mentions_class as usize;
            row.both += (f.mentions_method && f.mentions_class) as usize;
            row.file += f.mentions_file as usize;
            row.patch_link += f.has_patch_link as usize;
        }
    }
    rows.into_values().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Severity;
    use crate::vuln::Reference;

    fn vuln(description: &str, refs: Vec<Reference>) -> VulnRecord {
        VulnRecord {
            id: "V".into(),
            description: description.into(),
            severity: Severity::High,
            published: 0,
            references: refs,
            affected: vec![],
        }
    }

    #[test]
    fn method_and_file() {
        let f = scan_vulnerability(
            &vuln("heap overflow in png_set_PLTE() in pngset.c", vec![]),
            &PatternSet::default(),
        );
        assert!(f.mentions_method && f.mentions_file);
        assert!(!f.mentions_class && !f.has_patch_link);
        assert!(f.evidence.iter().any(|e| e.matched_text == "png_set_PLTE()"));
        assert!(f.evidence.iter().any(|e| e.matched_text == "pngset.c"));
    }

    #[test]
    fn plain_prose_is_all_false() {
        let f = scan_vulnerability(
            &vuln(
                "A remote attacker can crash the service with a crafted request.",
                vec![],
            ),
            &PatternSet::default(),
        );
        assert!(!f.mentions_method && !f.mentions_class && !f.mentions_file && !f.has_patch_link);
        assert!(f.evidence.is_empty());
    }

    #[test]
    fn patch_tag_and_commit_url() {
        let tagged = Reference {
            url: "https://example.org/advisory".into(),
            tags: vec!["Patch".into(), "Third Party Advisory".into()],
        };
        assert!(scan_vulnerability(&vuln("", vec![tagged]), &PatternSet::default()).has_patch_link);
        let commit = Reference {
            url: "https://github.com/a/b/commit/0123456789abcdef".into(),
            tags: vec![],
        };
        assert!(scan_vulnerability(&vuln("", vec![commit]), &PatternSet::default()).has_patch_link);
    }

    #[test]
    fn class_patterns() {
        let p = PatternSet::default();
        for text in [
            "the JmxMBeanServer class allows",
            "in class URLSession",
            "via `AFSecurityPolicy`",
            "calls SDWebImageManager.shared",
        ] {
            assert!(scan_vulnerability(&vuln(text, vec![]), &p).mentions_class, "{text}");
        }
        assert!(!scan_vulnerability(&vuln("a class of issues in Apple iOS", vec![]), &p).mentions_class);
    }

    #[test]
    fn patch_text_is_scanned_when_given() {
        let v = vuln("memory corruption", vec![]);
        let p = PatternSet::default();
        assert!(!scan_vulnerability(&v, &p).mentions_file);
        let f = scan_vulnerability_with_patch(&v, Some("--- a/src/decode.swift\n+++ b/src/decode.swift"), &p);
        assert!(f.mentions_file);
        assert!(f.evidence.iter().all(|e| e.field == Field::Patch));
    }

    #[test]
    fn json_round_trip_and_validation() {
        let p = PatternSet::default();
        let again = PatternSet::from_json(&p.to_json()).unwrap();
        assert_eq!(again.specs(), p.specs());
        assert!(matches!(
            PatternSet::from_json(r#"{"method":[{"name":"x","regex":"("}]}"#),
            Err(PatternError::InvalidRegex { .. })
        ));
        assert!(matches!(
            PatternSet::from_json(r#"{"method":[{"name":"x","regex":"a"}],"file":[{"name":"x","regex":"b"}]}"#),
            Err(PatternError::DuplicateName(_))
        ));
        assert!(matches!(PatternSet::from_json("[]"), Err(PatternError::Malformed(_))));
    }

    #[test]
    fn report_rows() {
        let g = Graph::empty();
        let flags: Vec<PrecisionFlags> = (0..3)
            .map(|i| PrecisionFlags {
                vuln_id: format!("V{i}"),
                mentions_method: i == 0,
                mentions_class: i == 0,
                mentions_file: false,
                has_patch_link: false,
                evidence: vec![],
            })
            .collect();
        let rows = precision_report(&flags, &g);
        assert_eq!(rows.len(), 1);
        assert_eq!(
            (rows[0].vulnerabilities, rows[0].method, rows[0].class, rows[0].both),
            (3, 1, 1, 1)
        );
    }
}
