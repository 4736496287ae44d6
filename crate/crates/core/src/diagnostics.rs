//! Non-fatal findings collected while ingesting and analyzing.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    MalformedLine,
    UnparseableVersion,
    UnversionedPin,
    UnsupportedEntry,
    DanglingDependency,
    DuplicateEntry,
    DuplicateRecord,
    UnresolvedRequirement,
    StubNode,
    UnmappedProduct,
    UnknownLibrary,
    UnmatchedVulnerability,
}

/// One warning record; serialized as a line of the warnings stream.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warning {
    pub kind: WarningKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    pub message: String,
}

impl Warning {
    pub fn new(kind: WarningKind, message: impl Into<String>) -> Self {
        Warning {
            kind,
            line: None,
            message: message.into(),
        }
    }

    pub fn at_line(kind: WarningKind, line: usize, message: impl Into<String>) -> Self {
        Warning {
            kind,
            line: Some(line),
            message: message.into(),
        }
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{:?} (line {line}): {}", self.kind, self.message),
            None => write!(f, "{:?}: {}", self.kind, self.message),
        }
    }
}

/// A value together with the warnings produced while computing it.
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed<T> {
    pub value: T,
    pub warnings: Vec<Warning>,
}

impl<T> Parsed<T> {
    pub fn new(value: T, warnings: Vec<Warning>) -> Self {
        Parsed { value, warnings }
    }
}
