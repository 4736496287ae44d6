//! Requirement extraction from developer-authored manifests.
//!
//! Package.swift is matched with patterns, never evaluated.

use std::sync::OnceLock;

use regex::Regex;

use crate::diagnostics::{Parsed, Warning, WarningKind};
use crate::model::{LibraryId, PackageManager};
use crate::version::{parse_version, Version};

use super::{Constraint, IngestError, Requirement, RequirementSet, SourceKind};

macro_rules! pattern {
    ($name:ident, $re:expr) => {
        fn $name() -> &'static Regex {
            static RE: OnceLock<Regex> = OnceLock::new();
            RE.get_or_init(|| Regex::new($re).unwrap())
        }
    };
}

pattern!(pod_line, r#"^\s*pod\s+['"]([^'"]+)['"]\s*(?:,(.*))?$"#);
pattern!(quoted, r#"['"]([^'"]*)['"]"#);
pattern!(pod_option, r#":?(\w+)\s*(?:=>|:)\s*['"]([^'"]*)['"]"#);
pattern!(cart_line, r#"^\s*(github|git|binary)\s+"([^"]+)"\s*(.*?)\s*(?:#.*)?$"#);
pattern!(spm_package, r"\.package\s*\(((?:[^()]|\([^()]*\))*)\)");
pattern!(spm_url, r#"url\s*:\s*"([^"]+)""#);
pattern!(spm_next_minor, r#"\.upToNextMinor\s*\(\s*from\s*:\s*"([^"]+)"\s*\)"#);
pattern!(spm_next_major, r#"\.upToNextMajor\s*\(\s*from\s*:\s*"([^"]+)"\s*\)"#);
pattern!(spm_exact, r#"(?:\.exact\s*\(\s*|exact\s*:\s*)"([^"]+)""#);
pattern!(spm_half_open, r#""([^"]+)"\s*\.\.<\s*"([^"]+)""#);
pattern!(spm_closed, r#""([^"]+)"\s*\.\.\.\s*"([^"]+)""#);
pattern!(spm_from, r#"from\s*:\s*"([^"]+)""#);
pattern!(
    spm_unresolvable,
    r"(?:\.branch\s*\(|\.revision\s*\(|branch\s*:|revision\s*:)"
);

/// Interprets a single operator requirement such as `~> 1.0` or `>= 2`.
/// `<=` and `>` are approximated by `<` and `>=`.
fn operator_requirement(text: &str) -> Option<Constraint> {
    let text = text.trim();
    let (op, rest) = ["~>", ">=", "<=", "==", "=", ">", "<"]
        .iter()
        .find_map(|op| text.strip_prefix(op).map(|rest| (*op, rest)))
        .unwrap_or(("=", text));
    let version = parse_version(rest.trim()).ok()?;
    Some(match op {
        "~>" => Constraint::optimistic(version),
        ">=" | ">" => Constraint::AtLeast { version },
        "<" | "<=" => Constraint::LessThan { version },
        _ => Constraint::Exact { version },
    })
}

/// Folds several operator requirements into one constraint.
fn combine(constraints: Vec<Constraint>) -> Option<Constraint> {
    let mut low: Option<Version> = None;
    let mut high: Option<Version> = None;
    for c in &constraints {
        match c {
            Constraint::Exact { .. } | Constraint::Optimistic { .. } if constraints.len() == 1 => {
                return Some(c.clone())
            }
            Constraint::Exact { version } => {
                return Some(Constraint::Exact {
                    version: version.clone(),
                })
            }
            Constraint::Optimistic { low: l, high: h } => {
                low = Some(l.clone());
                high = Some(high.map_or(h.clone(), |cur| cur.min(h.clone())));
            }
            Constraint::AtLeast { version } => low = Some(version.clone()),
            Constraint::LessThan { version } => {
                high = Some(high.map_or(version.clone(), |cur| cur.min(version.clone())))
            }
            _ => {}
        }
    }
    match (low, high) {
        (Some(low), Some(high)) if low <= high => Some(Constraint::Range {
            low,
            high,
            high_inclusive: false,
        }),
        (Some(_), Some(_)) => None,
        (Some(version), None) => Some(Constraint::AtLeast { version }),
        (None, Some(version)) => Some(Constraint::LessThan { version }),
        (None, None) => None,
    }
}

fn parse_podfile(text: &str, warnings: &mut Vec<Warning>) -> Vec<Requirement> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("");
        let Some(caps) = pod_line().captures(line) else {
            continue;
        };
        let Ok(library) = LibraryId::from_pod_name(&caps[1]) else {
            continue;
        };
        let args = caps.get(2).map_or("", |m| m.as_str());
        let options: Vec<(String, String)> = pod_option()
            .captures_iter(args)
            .map(|c| (c[1].to_string(), c[2].to_string()))
            .collect();
        let option = |key: &str| options.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str());

        let constraint = if let Some(tag) = option("tag") {
            parse_version(tag).map_or(Constraint::Unresolvable, |version| Constraint::Exact { version })
        } else if ["git", "branch", "commit", "path", "podspec"]
            .iter()
            .any(|k| option(k).is_some())
        {
            Constraint::Unresolvable
        } else {
            let option_values: Vec<&str> = options.iter().map(|(_, v)| v.as_str()).collect();
            let reqs: Vec<&str> = quoted()
                .captures_iter(args)
                .map(|c| c.get(1).unwrap().as_str())
                .filter(|s| !option_values.contains(s))
                .collect();
            if reqs.is_empty() {
                Constraint::at_least_zero()
            } else {
                match reqs
                    .iter()
                    .map(|r| operator_requirement(r))
                    .collect::<Option<Vec<_>>>()
                    .and_then(combine)
                {
                    Some(c) => c,
                    None => {
                        warnings.push(Warning::at_line(
                            WarningKind::UnparseableVersion,
                            idx + 1,
                            format!("pod {library}: cannot interpret requirement {args:?}"),
                        ));
                        Constraint::Unresolvable
                    }
                }
            }
        };
        out.push(Requirement { library, constraint });
    }
    out
}

fn parse_cartfile(text: &str, warnings: &mut Vec<Warning>) -> Vec<Requirement> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let Some(caps) = cart_line().captures(line) else {
            continue;
        };
        if &caps[1] == "binary" {
            warnings.push(Warning::at_line(
                WarningKind::UnsupportedEntry,
                idx + 1,
                format!("binary framework {:?} skipped", &caps[2]),
            ));
            continue;
        }
        let Ok(library) = LibraryId::from_repository_url(&caps[2]) else {
            continue;
        };
        let spec = caps[3].trim();
        let constraint = if spec.is_empty() {
            Constraint::at_least_zero()
        } else if let Some(reference) = spec.strip_prefix('"') {
            let reference = reference.trim_end_matches('"');
            // a quoted reference that is a version tag pins it exactly
            parse_version(reference).map_or(Constraint::Unresolvable, |version| Constraint::Exact { version })
        } else {
            match operator_requirement(spec) {
                Some(c) => c,
                None => {
                    warnings.push(Warning::at_line(
                        WarningKind::UnparseableVersion,
                        idx + 1,
                        format!("{library}: cannot interpret requirement {spec:?}"),
                    ));
                    Constraint::Unresolvable
                }
            }
        };
        out.push(Requirement { library, constraint });
    }
    out
}

fn parse_package_swift(text: &str, warnings: &mut Vec<Warning>) -> Vec<Requirement> {
    let mut out = Vec::new();
    for caps in spm_package().captures_iter(text) {
        let body = &caps[1];
        let Some(url) = spm_url().captures(body) else {
            // local `.package(path:)` declarations have no version
            continue;
        };
        let Ok(library) = LibraryId::from_repository_url(&url[1]) else {
            continue;
        };
        let version_of = |re: &Regex, group: usize| -> Option<Result<Version, String>> {
            re.captures(body)
                .map(|c| parse_version(&c[group]).map_err(|e| e.to_string()))
        };
        let constraint = if let Some(v) = version_of(spm_next_minor(), 1) {
            v.map(|v| {
                let high = v.next_minor();
                Constraint::Optimistic { low: v, high }
            })
        } else if let Some(v) = version_of(spm_next_major(), 1) {
            v.map(|version| Constraint::UpToNextMajor { version })
        } else if let Some(v) = version_of(spm_exact(), 1) {
            v.map(|version| Constraint::Exact { version })
        } else if let Some(c) = spm_half_open().captures(body).or_else(|| spm_closed().captures(body)) {
            let inclusive = spm_half_open().captures(body).is_none();
            match (parse_version(&c[1]), parse_version(&c[2])) {
                (Ok(low), Ok(high)) if low <= high => Ok(Constraint::Range {
                    low,
                    high,
                    high_inclusive: inclusive,
                }),
                _ => Err(format!("bad range {:?}", &c[0])),
            }
        } else if let Some(v) = version_of(spm_from(), 1) {
            v.map(|version| Constraint::UpToNextMajor { version })
        } else if spm_unresolvable().is_match(body) {
            Ok(Constraint::Unresolvable)
        } else {
            Err(format!("no recognizable requirement in {body:?}"))
        };
        let constraint = constraint.unwrap_or_else(|msg| {
            warnings.push(Warning::new(
                WarningKind::UnparseableVersion,
                format!("{library}: {msg}"),
            ));
            Constraint::Unresolvable
        });
        out.push(Requirement { library, constraint });
    }
    out
}

/// Extracts dependency requirements from a Podfile, Cartfile or
/// Package.swift.
///
/// Fails only when a non-blank file yields no declarations at all. A library
/// declared twice keeps its first constraint.
pub fn parse_manifest_requirements(text: &str, kind: PackageManager) -> Result<Parsed<RequirementSet>, IngestError> {
    let mut warnings = Vec::new();
    let (source_kind, found) = match kind {
        PackageManager::CocoaPods => (SourceKind::Podfile, parse_podfile(text, &mut warnings)),
        PackageManager::Carthage => (SourceKind::Cartfile, parse_cartfile(text, &mut warnings)),
        PackageManager::SwiftPM => (SourceKind::PackageSwift, parse_package_swift(text, &mut warnings)),
    };
    if found.is_empty() && warnings.is_empty() && !text.trim().is_empty() {
        return Err(IngestError::MalformedManifest);
    }
    let mut requirements: Vec<Requirement> = Vec::with_capacity(found.len());
    for req in found {
        if requirements.iter().any(|r| r.library == req.library) {
            warnings.push(Warning::new(
                WarningKind::DuplicateEntry,
                format!("{} declared twice; keeping the first", req.library),
            ));
        } else {
            requirements.push(req);
        }
    }
    Ok(Parsed::new(
        RequirementSet {
            source_kind,
            requirements,
        },
        warnings,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ConstraintKind;

    fn v(s: &str) -> Version {
        parse_version(s).unwrap()
    }

    fn single(text: &str, kind: PackageManager) -> Requirement {
        let parsed = parse_manifest_requirements(text, kind).unwrap();
        assert_eq!(parsed.value.requirements.len(), 1, "{:?}", parsed.value);
        parsed.value.requirements.into_iter().next().unwrap()
    }

    #[test]
    fn bare_pod_means_any_version() {
        let r = single("    pod 'LibraryB'", PackageManager::CocoaPods);
        assert_eq!(r.library.as_str(), "libraryb");
        assert_eq!(r.constraint, Constraint::at_least_zero());
    }

    #[test]
    fn podfile_forms() {
        let text = r#"
platform :ios, '12.0'
use_frameworks!

target 'App' do
  pod 'Alamofire', '~> 5.2'
  pod 'SnapKit', '5.0.1'
  pod 'Kingfisher', '>= 6.0', '< 7.0'
  pod 'Firebase/Analytics'
  pod 'Private', :git => 'https://example.com/p.git', :branch => 'dev'
  pod 'Tagged', :git => 'https://example.com/t.git', :tag => '2.1.0'
  pod 'Local', :path => '../Local'
  # pod 'Commented', '1.0'
end
"#;
        let set = parse_manifest_requirements(text, PackageManager::CocoaPods)
            .unwrap()
            .value;
        let got: Vec<(&str, ConstraintKind)> = set
            .requirements
            .iter()
            .map(|r| (r.library.as_str(), r.constraint.kind()))
            .collect();
        assert_eq!(
            got,
            [
                ("alamofire", ConstraintKind::Optimistic),
                ("snapkit", ConstraintKind::Exact),
                ("kingfisher", ConstraintKind::Range),
                ("firebase", ConstraintKind::AtLeast),
                ("private", ConstraintKind::Unresolvable),
                ("tagged", ConstraintKind::Exact),
                ("local", ConstraintKind::Unresolvable),
            ]
        );
        assert!(set.requirements[0].constraint.allows(&v("5.9")));
        assert!(!set.requirements[0].constraint.allows(&v("6.0")));
        assert!(set.requirements[2].constraint.allows(&v("6.5")));
        assert!(!set.requirements[2].constraint.allows(&v("7.0")));
    }

    #[test]
    fn cartfile_forms() {
        let text = r#"
github "a/b" "develop"
github "c/d" ~> 1.0
github "e/f" == 2.3.4
git "https://example.com/g.git" >= 1.0
github "h/i"
"#;
        let set = parse_manifest_requirements(text, PackageManager::Carthage)
            .unwrap()
            .value;
        let got: Vec<(&str, ConstraintKind)> = set
            .requirements
            .iter()
            .map(|r| (r.library.as_str(), r.constraint.kind()))
            .collect();
        assert_eq!(
            got,
            [
                ("a/b", ConstraintKind::Unresolvable),
                ("c/d", ConstraintKind::Optimistic),
                ("e/f", ConstraintKind::Exact),
                ("example.com/g", ConstraintKind::AtLeast),
                ("h/i", ConstraintKind::AtLeast),
            ]
        );
    }

    #[test]
    fn package_swift_forms() {
        let text = r#"
// swift-tools-version:5.5
import PackageDescription

let package = Package(
    name: "Demo",
    dependencies: [
        .package(url: "https://github.com/a/b", from: "1.2.0"),
        .package(url: "https://github.com/c/d.git", .upToNextMinor(from: "2.1.0")),
        .package(url: "https://github.com/e/f", .upToNextMajor(from: "3.0.0")),
        .package(url: "https://github.com/g/h", exact: "4.0.1"),
        .package(url: "https://github.com/i/j", "1.0.0"..<"1.5.0"),
        .package(url: "https://github.com/k/l", branch: "main"),
        .package(name: "M", url: "https://gitlab.com/m/n", .revision("abc123")),
        .package(path: "../Local"),
    ],
    targets: []
)
"#;
        let set = parse_manifest_requirements(text, PackageManager::SwiftPM)
            .unwrap()
            .value;
        let got: Vec<(&str, ConstraintKind)> = set
            .requirements
            .iter()
            .map(|r| (r.library.as_str(), r.constraint.kind()))
            .collect();
        assert_eq!(
            got,
            [
                ("a/b", ConstraintKind::AtLeast),
                ("c/d", ConstraintKind::Optimistic),
                ("e/f", ConstraintKind::AtLeast),
                ("g/h", ConstraintKind::Exact),
                ("i/j", ConstraintKind::Range),
                ("k/l", ConstraintKind::Unresolvable),
                ("gitlab.com/m/n", ConstraintKind::Unresolvable),
            ]
        );
        let from = &set.requirements[0].constraint;
        assert_eq!(from, &Constraint::UpToNextMajor { version: v("1.2.0") });
        assert!(from.allows(&v("1.9.0")) && !from.allows(&v("2.0.0")));
        assert!(set.requirements[1].constraint.allows(&v("2.1.5")));
        assert!(!set.requirements[1].constraint.allows(&v("2.2.0")));
    }

    #[test]
    fn empty_and_garbage_manifests() {
        let empty = parse_manifest_requirements("  \n", PackageManager::CocoaPods).unwrap();
        assert!(empty.value.requirements.is_empty());
        assert_eq!(
            parse_manifest_requirements("platform :ios", PackageManager::CocoaPods).unwrap_err(),
            IngestError::MalformedManifest
        );
    }

    #[test]
    fn duplicate_declarations_keep_first() {
        let text = "pod 'A', '1.0'\npod 'A/Sub', '2.0'\n";
        let parsed = parse_manifest_requirements(text, PackageManager::CocoaPods).unwrap();
        assert_eq!(parsed.value.requirements.len(), 1);
        assert_eq!(
            parsed.value.requirements[0].constraint,
            Constraint::Exact { version: v("1.0") }
        );
        assert_eq!(parsed.warnings[0].kind, WarningKind::DuplicateEntry);
    }
}
