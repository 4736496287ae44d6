use serde::Deserialize;
use serde_json::{json, Value};

use crate::diagnostics::{Parsed, Warning, WarningKind};
use crate::model::LibraryId;
use crate::version::parse_version;

use super::{IngestError, ResolvedEntry, ResolvedManifest, SourceKind};

#[derive(Debug, Deserialize)]
struct PinState {
    #[serde(default)]
    version: Option<String>,
    #[serde(default)]
    branch: Option<String>,
    #[serde(default)]
    revision: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct PinV1 {
    #[serde(default)]
    package: Option<String>,
    #[serde(rename = "repositoryURL")]
    repository_url: String,
    state: PinState,
}

#[derive(Debug, Deserialize)]
struct PinV2 {
    #[serde(default)]
    identity: Option<String>,
    location: String,
    state: PinState,
}

/// Parses a Swift PM Package.resolved (format versions 1, 2 and 3).
///
/// Pins without a version (branch or revision pins) are skipped with a
/// warning.
pub fn parse_package_resolved(text: &str) -> Result<Parsed<ResolvedManifest>, IngestError> {
    let malformed = |msg: String| IngestError::MalformedDocument(msg);
    let doc: Value = serde_json::from_str(text).map_err(|e| malformed(e.to_string()))?;
    let format = doc
        .get("version")
        .and_then(Value::as_i64)
        .ok_or_else(|| malformed("missing integer \"version\" field".into()))?;

    let pins: Vec<(String, Option<String>, PinState)> = match format {
        1 => {
            let pins = doc
                .pointer("/object/pins")
                .cloned()
                .ok_or_else(|| malformed("missing object.pins".into()))?;
            let pins: Vec<PinV1> = serde_json::from_value(pins).map_err(|e| malformed(e.to_string()))?;
            pins.into_iter()
                .map(|p| (p.repository_url, p.package, p.state))
                .collect()
        }
        2 | 3 => {
            let pins = doc
                .get("pins")
                .cloned()
                .ok_or_else(|| malformed("missing pins".into()))?;
            let pins: Vec<PinV2> = serde_json::from_value(pins).map_err(|e| malformed(e.to_string()))?;
            pins.into_iter().map(|p| (p.location, p.identity, p.state)).collect()
        }
        other => return Err(IngestError::UnsupportedFormatVersion(other)),
    };

    let mut manifest = ResolvedManifest::new(SourceKind::SwiftpmResolved);
    let mut warnings = Vec::new();
    for (location, name, state) in pins {
        let label = name.unwrap_or_else(|| location.clone());
        let library = match LibraryId::from_repository_url(&location) {
            Ok(id) => id,
            Err(_) => {
                warnings.push(Warning::new(
                    WarningKind::MalformedLine,
                    format!("pin {label:?} has an empty location"),
                ));
                continue;
            }
        };
        let Some(tag) = state.version else {
            let pin = state
                .branch
                .map(|b| format!("branch {b:?}"))
                .or_else(|| state.revision.map(|r| format!("revision {r}")))
                .unwrap_or_else(|| "no version".into());
            warnings.push(Warning::new(
                WarningKind::UnversionedPin,
                format!("{library} pinned to {pin}; skipped"),
            ));
            continue;
        };
        let version = match parse_version(&tag) {
            Ok(v) => v,
            Err(e) => {
                warnings.push(Warning::new(WarningKind::UnparseableVersion, format!("{library}: {e}")));
                continue;
            }
        };
        if manifest.entry(&library).is_some() {
            warnings.push(Warning::new(
                WarningKind::DuplicateEntry,
                format!("{library} pinned twice; keeping the first"),
            ));
            continue;
        }
        manifest.entries.push(ResolvedEntry {
            library,
            version,
            deps: Vec::new(),
        });
    }
    Ok(Parsed::new(manifest, warnings))
}

/// Renders a format-version-2 document.
pub fn render_package_resolved(manifest: &ResolvedManifest) -> String {
    let pins: Vec<Value> = manifest
        .entries
        .iter()
        .map(|e| {
            let id = e.library.as_str();
            let location = if id.split('/').next().is_some_and(|h| h.contains('.')) {
                format!("https://{id}")
            } else {
                format!("https://github.com/{id}")
            };
            json!({
                "identity": id.rsplit('/').next().unwrap_or(id),
                "kind": "remoteSourceControl",
                "location": location,
                "state": { "version": e.version.to_string() }
            })
        })
        .collect();
    let doc = json!({ "pins": pins, "version": 2 });
    serde_json::to_string_pretty(&doc).expect("json values always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn v1_single_pin() {
        let text = r#"{
  "object": {
    "pins": [
      {
        "package": "Nimble",
        "repositoryURL": "https://github.com/Quick/Nimble",
        "state": { "branch": null, "revision": "abc", "version": "9.0.0" }
      }
    ]
  },
  "version": 1
}"#;
        let parsed = parse_package_resolved(text).unwrap();
        assert_eq!(parsed.value.entries.len(), 1);
        assert_eq!(parsed.value.entries[0].library.as_str(), "quick/nimble");
        assert_eq!(parsed.value.entries[0].version.to_string(), "9.0.0");
    }

    #[test]
    fn v2_two_pins_and_branch_pin() {
        let text = r#"{
  "pins": [
    { "identity": "alamofire", "kind": "remoteSourceControl",
      "location": "https://github.com/Alamofire/Alamofire.git",
      "state": { "revision": "r1", "version": "5.6.1" } },
    { "identity": "nimble", "kind": "remoteSourceControl",
      "location": "https://github.com/Quick/Nimble",
      "state": { "revision": "r2", "version": "10.0.0" } },
    { "identity": "quick", "kind": "remoteSourceControl",
      "location": "https://github.com/Quick/Quick",
      "state": { "branch": "main", "revision": "r3", "version": null } }
  ],
  "version": 2
}"#;
        let parsed = parse_package_resolved(text).unwrap();
        assert_eq!(parsed.value.entries.len(), 2);
        assert_eq!(parsed.warnings.len(), 1);
        assert_eq!(parsed.warnings[0].kind, WarningKind::UnversionedPin);
        assert!(parsed.warnings[0].message.contains("main"));
    }

    #[test]
    fn format_errors() {
        assert!(matches!(
            parse_package_resolved("{ not json"),
            Err(IngestError::MalformedDocument(_))
        ));
        assert!(matches!(
            parse_package_resolved(r#"{"pins": []}"#),
            Err(IngestError::MalformedDocument(_))
        ));
        assert_eq!(
            parse_package_resolved(r#"{"pins": [], "version": 9}"#),
            Err(IngestError::UnsupportedFormatVersion(9))
        );
    }

    #[test]
    fn render_round_trip() {
        let text = r#"{"pins":[{"location":"https://gitlab.com/a/b","state":{"version":"1.0.0"}},
            {"location":"https://github.com/c/d","state":{"version":"v2.0"}}],"version":2}"#;
        let m = parse_package_resolved(text).unwrap().value;
        assert_eq!(parse_package_resolved(&render_package_resolved(&m)).unwrap().value, m);
    }
}
