//! Newline-delimited sidecar files: library metadata and CPE mappings.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{Parsed, Warning, WarningKind};
use crate::model::LibraryId;

use super::IngestError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LibraryMeta {
    pub library: LibraryId,
    /// Main project language as reported by the hosting service.
    pub language: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repository_url: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductMapping {
    pub product_key: String,
    pub library: LibraryId,
}

fn records<T: for<'de> Deserialize<'de>>(text: &str) -> impl Iterator<Item = Result<(usize, T), IngestError>> + '_ {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(idx, line)| {
            serde_json::from_str::<T>(line)
                .map(|rec| (idx + 1, rec))
                .map_err(|e| IngestError::MalformedRecord {
                    line: idx + 1,
                    message: e.to_string(),
                })
        })
}

/// Loads library metadata. A repeated library id replaces the earlier
/// record and produces a warning.
pub fn load_library_metadata(text: &str) -> Result<Parsed<Vec<LibraryMeta>>, IngestError> {
    let mut out: Vec<LibraryMeta> = Vec::new();
    let mut index: HashMap<LibraryId, usize> = HashMap::new();
    let mut warnings = Vec::new();
    for rec in records::<LibraryMeta>(text) {
        let (line, meta) = rec?;
        match index.get(&meta.library) {
            Some(&i) => {
                warnings.push(Warning::at_line(
                    WarningKind::DuplicateRecord,
                    line,
                    format!("metadata for {} repeated; last record wins", meta.library),
                ));
                out[i] = meta;
            }
            None => {
                index.insert(meta.library.clone(), out.len());
                out.push(meta);
            }
        }
    }
    Ok(Parsed::new(out, warnings))
}

/// Loads `{"product_key", "library"}` records for [`import_nvd_feed`].
///
/// [`import_nvd_feed`]: super::import_nvd_feed
pub fn load_product_mapping(text: &str) -> Result<Vec<(String, LibraryId)>, IngestError> {
    records::<ProductMapping>(text)
        .map(|rec| rec.map(|(_, m)| (m.product_key, m.library)))
        .collect()
}
