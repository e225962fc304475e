//! Findings shared by the security detectors and the maintainability checks.

use crate::frontend::Span;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::str::FromStr;

/// A CWE identifier. Serialized as `"CWE-89"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CweId(pub u32);

impl CweId {
    /// Canonical short name for the built-in categories.
    pub fn short_name(self) -> Option<&'static str> {
        Some(match self.0 {
            22 => "Path Traversal",
            78 => "OS Command Injection",
            79 => "Cross-site Scripting",
            89 => "SQL Injection",
            352 => "Cross-Site Request Forgery",
            _ => return None,
        })
    }
}

impl fmt::Display for CweId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CWE-{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid CWE id {0:?} (expected e.g. CWE-89 or 89)")]
pub struct BadCweId(pub String);

impl FromStr for CweId {
    type Err = BadCweId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let digits = t.strip_prefix("CWE-").or_else(|| t.strip_prefix("cwe-")).unwrap_or(t);
        digits.parse::<u32>().map(CweId).map_err(|_| BadCweId(s.to_string()))
    }
}

impl Serialize for CweId {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CweId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(u32),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) => Ok(CweId(n)),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FindingKind {
    Vulnerability,
    MissingAnnotation,
    TypeMismatch,
    UnreachableCode,
    SignatureInconsistency,
    UnusedCode,
}

impl FindingKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FindingKind::Vulnerability => "vulnerability",
            FindingKind::MissingAnnotation => "missing-annotation",
            FindingKind::TypeMismatch => "type-mismatch",
            FindingKind::UnreachableCode => "unreachable-code",
            FindingKind::SignatureInconsistency => "signature-inconsistency",
            FindingKind::UnusedCode => "unused-code",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Severity {
    Vulnerability,
    Maintainability,
}

/// One step of a flow path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Hop {
    pub line: u32,
    pub col: u32,
    pub text: String,
    #[serde(skip)]
    pub note: String,
    #[serde(skip)]
    pub anchor: HopAnchor,
}

/// Where a hop sits in the analyzed program (used for path validation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HopAnchor {
    pub scope: usize,
    pub block: usize,
    /// Instruction index in the block, or `None` for a φ-node hop.
    pub index: Option<usize>,
    /// Index of the φ in its block when `index` is `None`.
    pub phi: usize,
}

impl Hop {
    pub fn span(&self) -> Span {
        Span::new(self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Evidence {
    /// Source-to-sink path; first hop is the source, last hop the sink.
    Flow(Vec<Hop>),
    /// A location in the syntax tree.
    Location { span: Span, text: String },
}

impl Evidence {
    pub fn hops(&self) -> Vec<Hop> {
        match self {
            Evidence::Flow(h) => h.clone(),
            Evidence::Location { span, text } => vec![Hop {
                line: span.line,
                col: span.col,
                text: text.clone(),
                note: String::new(),
                anchor: HopAnchor::default(),
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub cwe_id: Option<CweId>,
    pub kind: FindingKind,
    pub severity: Severity,
    pub message: String,
    /// Primary location: the sink call for flows, the node otherwise.
    pub span: Span,
    pub evidence: Evidence,
}

impl Finding {
    pub fn sort_key(&self) -> (Span, u32, FindingKind, String) {
        (self.span, self.cwe_id.map(|c| c.0).unwrap_or(0), self.kind, self.message.clone())
    }

    pub fn to_record(&self, candidate_id: &str) -> FindingRecord {
        FindingRecord {
            candidate_id: candidate_id.to_string(),
            cwe_id: self.cwe_id,
            kind: self.kind,
            severity: self.severity,
            message: self.message.clone(),
            line: self.span.line,
            col: self.span.col,
            path: self.evidence.hops(),
        }
    }
}

/// Stable serialized form of a finding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FindingRecord {
    pub candidate_id: String,
    pub cwe_id: Option<CweId>,
    pub kind: FindingKind,
    pub severity: Severity,
    pub message: String,
    pub line: u32,
    pub col: u32,
    pub path: Vec<Hop>,
}

/// Sorts by (line, column, cwe, kind) and drops exact duplicates.
pub fn sort_findings(findings: &mut Vec<Finding>) {
    findings.sort_by_key(|f| f.sort_key());
    findings.dedup_by(|a, b| a.sort_key() == b.sort_key());
}
