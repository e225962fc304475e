//! Task and candidate records, loaded from line-delimited JSON.
//!
//! Every record carries `"schema_version": 1`. Task record:
//!
//! ```json
//! {"schema_version": 1, "task_id": "sql-001", "prompt": "...", "mode": "security",
//!  "cwe_tags": ["CWE-89"], "entry_point": null,
//!  "unit_tests": [{"test_id": "t1", "stdin_payload": "3\n", "argv": [],
//!                  "expected_stdout": "alice", "timeout_ms": 5000}],
//!  "fixtures": [{"fixture_id": "db", "kind": "sqlite_script", "payload": "CREATE TABLE ..."}]}
//! ```
//!
//! Candidate record: `{"schema_version": 1, "candidate_id": "c1", "task_id": "sql-001", "source": "..."}`.
//!
//! A `sqlite_script` fixture is executed into a fresh database file before
//! every unit test; the file's path is exported to the candidate in the
//! [`FIXTURE_DB_ENV`] environment variable. A `file_tree` fixture maps
//! relative paths to file contents, written into the test's working directory.

use crate::exec::normalize_output;
use crate::finding::CweId;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

/// Environment variable holding the path of the per-test fixture database.
pub const FIXTURE_DB_ENV: &str = "FIXTURE_DB";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Security,
    Maintainability,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitTest {
    pub test_id: String,
    #[serde(default)]
    pub stdin_payload: String,
    #[serde(default)]
    pub argv: Vec<String>,
    pub expected_stdout: String,
    pub timeout_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureKind {
    SqliteScript,
    FileTree,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FixturePayload {
    Text(String),
    Files(BTreeMap<String, String>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fixture {
    pub fixture_id: String,
    pub kind: FixtureKind,
    pub payload: FixturePayload,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: String,
    pub prompt: String,
    pub mode: Mode,
    #[serde(default)]
    pub cwe_tags: Vec<CweId>,
    pub unit_tests: Vec<UnitTest>,
    #[serde(default)]
    pub fixtures: Vec<Fixture>,
    #[serde(default)]
    pub entry_point: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateProgram {
    pub candidate_id: String,
    pub task_id: String,
    #[serde(default)]
    pub source: String,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: field `{field}`: {message}")]
    Record { line: usize, field: String, message: String },
    #[error("line {line}: duplicate task_id {task_id:?} (first defined on line {first})")]
    DuplicateTask { line: usize, task_id: String, first: usize },
}

impl LoadError {
    pub fn line(&self) -> Option<usize> {
        match self {
            LoadError::Io { .. } => None,
            LoadError::Record { line, .. } | LoadError::DuplicateTask { line, .. } => Some(*line),
        }
    }

    pub fn field(&self) -> Option<&str> {
        match self {
            LoadError::Record { field, .. } => Some(field),
            LoadError::DuplicateTask { .. } => Some("task_id"),
            LoadError::Io { .. } => None,
        }
    }
}

/// A field present in a record but not part of the schema.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownField {
    pub line: usize,
    pub field: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Loaded<T> {
    pub records: Vec<T>,
    pub warnings: Vec<UnknownField>,
}

fn err(line: usize, field: impl Into<String>, message: impl Into<String>) -> LoadError {
    LoadError::Record { line, field: field.into(), message: message.into() }
}

const TASK_FIELDS: &[&str] =
    &["schema_version", "task_id", "prompt", "mode", "cwe_tags", "unit_tests", "fixtures", "entry_point"];
const TASK_REQUIRED: &[&str] = &["task_id", "prompt", "mode", "unit_tests"];
const TEST_FIELDS: &[&str] = &["test_id", "stdin_payload", "argv", "expected_stdout", "timeout_ms"];
const TEST_REQUIRED: &[&str] = &["test_id", "expected_stdout", "timeout_ms"];
const FIXTURE_FIELDS: &[&str] = &["fixture_id", "kind", "payload"];
const CANDIDATE_FIELDS: &[&str] = &["schema_version", "candidate_id", "task_id", "source"];
const CANDIDATE_REQUIRED: &[&str] = &["candidate_id", "task_id"];

/// Checks required and unknown keys of one JSON object.
fn check_keys(
    obj: &Map<String, Value>,
    line: usize,
    prefix: &str,
    known: &[&str],
    required: &[&str],
    warnings: &mut Vec<UnknownField>,
) -> Result<(), LoadError> {
    for r in required {
        match obj.get(*r) {
            None | Some(Value::Null) => return Err(err(line, format!("{prefix}{r}"), "missing required field")),
            _ => {}
        }
    }
    for k in obj.keys() {
        if !known.contains(&k.as_str()) {
            log::warn!("line {line}: ignoring unknown field `{prefix}{k}`");
            warnings.push(UnknownField { line, field: format!("{prefix}{k}") });
        }
    }
    Ok(())
}

fn as_object<'a>(v: &'a Value, line: usize, field: &str) -> Result<&'a Map<String, Value>, LoadError> {
    v.as_object().ok_or_else(|| err(line, field, "expected an object"))
}

fn check_version(obj: &Map<String, Value>, line: usize) -> Result<(), LoadError> {
    match obj.get("schema_version") {
        None => Err(err(line, "schema_version", "missing required field")),
        Some(v) if v.as_u64() == Some(u64::from(SCHEMA_VERSION)) => Ok(()),
        Some(v) => Err(err(line, "schema_version", format!("unsupported schema version {v}, expected {SCHEMA_VERSION}"))),
    }
}

/// Typed decoding with the failing field path in the error.
fn decode<T: DeserializeOwned>(v: Value, line: usize) -> Result<T, LoadError> {
    serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        err(line, if path == "." { "record".to_string() } else { path }, e.into_inner().to_string())
    })
}

fn parse_lines(text: &str) -> impl Iterator<Item = (usize, Result<Value, LoadError>)> + '_ {
    text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()).map(|(i, l)| {
        let line = i + 1;
        (line, serde_json::from_str::<Value>(l).map_err(|e| err(line, "record", format!("malformed JSON: {e}"))))
    })
}

impl TaskSpec {
    /// Checks the record invariants; `line` is used for error reporting.
    pub fn validate(&self, line: usize) -> Result<(), LoadError> {
        if self.task_id.trim().is_empty() {
            return Err(err(line, "task_id", "must not be empty"));
        }
        match (self.mode, self.cwe_tags.is_empty()) {
            (Mode::Security, true) => return Err(err(line, "cwe_tags", "security tasks need at least one CWE tag")),
            (Mode::Maintainability, false) => {
                return Err(err(line, "cwe_tags", "maintainability tasks must not carry CWE tags"))
            }
            _ => {}
        }
        if self.unit_tests.is_empty() {
            return Err(err(line, "unit_tests", "at least one unit test is required"));
        }
        let mut ids = HashSet::new();
        for (i, t) in self.unit_tests.iter().enumerate() {
            if t.timeout_ms == 0 {
                return Err(err(line, format!("unit_tests[{i}].timeout_ms"), "must be positive"));
            }
            if !ids.insert(t.test_id.as_str()) {
                return Err(err(line, format!("unit_tests[{i}].test_id"), format!("duplicate test_id {:?}", t.test_id)));
            }
        }
        for (i, f) in self.fixtures.iter().enumerate() {
            match (f.kind, &f.payload) {
                (FixtureKind::SqliteScript, FixturePayload::Text(_)) | (FixtureKind::FileTree, FixturePayload::Files(_)) => {}
                (FixtureKind::SqliteScript, _) => {
                    return Err(err(line, format!("fixtures[{i}].payload"), "sqlite_script payload must be a string"))
                }
                (FixtureKind::FileTree, FixturePayload::Text(_)) => {
                    return Err(err(line, format!("fixtures[{i}].payload"), "file_tree payload must map paths to contents"))
                }
            }
            if let FixturePayload::Files(files) = &f.payload {
                for p in files.keys() {
                    let rel = Path::new(p);
                    if rel.is_absolute() || rel.components().any(|c| matches!(c, std::path::Component::ParentDir)) {
                        return Err(err(line, format!("fixtures[{i}].payload"), format!("path {p:?} escapes the sandbox")));
                    }
                }
            }
        }
        if let Some(ep) = &self.entry_point {
            let ok = ep.chars().next().is_some_and(|c| c.is_alphabetic() || c == '_')
                && ep.chars().all(|c| c.is_alphanumeric() || c == '_');
            if !ok {
                return Err(err(line, "entry_point", format!("{ep:?} is not a function name")));
            }
        }
        Ok(())
    }

    pub fn to_record(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("task serializes");
        let obj = v.as_object_mut().expect("task is an object");
        obj.insert("schema_version".into(), SCHEMA_VERSION.into());
        v
    }

    pub fn fixture_script(&self) -> Option<String> {
        let scripts: Vec<&str> = self
            .fixtures
            .iter()
            .filter_map(|f| match (&f.kind, &f.payload) {
                (FixtureKind::SqliteScript, FixturePayload::Text(t)) => Some(t.as_str()),
                _ => None,
            })
            .collect();
        (!scripts.is_empty()).then(|| scripts.join("\n"))
    }
}

impl CandidateProgram {
    pub fn to_record(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("candidate serializes");
        v.as_object_mut().expect("candidate is an object").insert("schema_version".into(), SCHEMA_VERSION.into());
        v
    }
}

fn parse_task(v: Value, line: usize, warnings: &mut Vec<UnknownField>) -> Result<TaskSpec, LoadError> {
    let obj = as_object(&v, line, "record")?;
    check_version(obj, line)?;
    check_keys(obj, line, "", TASK_FIELDS, TASK_REQUIRED, warnings)?;
    if let Some(Value::Array(tests)) = obj.get("unit_tests") {
        for (i, t) in tests.iter().enumerate() {
            let prefix = format!("unit_tests[{i}].");
            check_keys(as_object(t, line, &prefix[..prefix.len() - 1])?, line, &prefix, TEST_FIELDS, TEST_REQUIRED, warnings)?;
        }
    }
    if let Some(Value::Array(fixtures)) = obj.get("fixtures") {
        for (i, f) in fixtures.iter().enumerate() {
            let prefix = format!("fixtures[{i}].");
            check_keys(as_object(f, line, &prefix[..prefix.len() - 1])?, line, &prefix, FIXTURE_FIELDS, FIXTURE_FIELDS, warnings)?;
        }
    }
    let mut task: TaskSpec = decode(v, line)?;
    task.validate(line)?;
    for t in &mut task.unit_tests {
        t.expected_stdout = normalize_output(&t.expected_stdout);
    }
    Ok(task)
}

/// Parses a task corpus; order is preserved.
pub fn parse_task_corpus(text: &str) -> Result<Loaded<TaskSpec>, LoadError> {
    let mut out = Loaded { records: Vec::new(), warnings: Vec::new() };
    let mut first_line: BTreeMap<String, usize> = BTreeMap::new();
    for (line, v) in parse_lines(text) {
        let task = parse_task(v?, line, &mut out.warnings)?;
        if let Some(&first) = first_line.get(&task.task_id) {
            return Err(LoadError::DuplicateTask { line, task_id: task.task_id, first });
        }
        first_line.insert(task.task_id.clone(), line);
        out.records.push(task);
    }
    Ok(out)
}

pub fn parse_candidates(text: &str) -> Result<Loaded<CandidateProgram>, LoadError> {
    let mut out = Loaded { records: Vec::new(), warnings: Vec::new() };
    for (line, v) in parse_lines(text) {
        let v = v?;
        let obj = as_object(&v, line, "record")?;
        check_version(obj, line)?;
        check_keys(obj, line, "", CANDIDATE_FIELDS, CANDIDATE_REQUIRED, &mut out.warnings)?;
        let c: CandidateProgram = decode(v, line)?;
        if c.task_id.trim().is_empty() {
            return Err(err(line, "task_id", "must not be empty"));
        }
        out.records.push(c);
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String, LoadError> {
    std::fs::read_to_string(path).map_err(|source| LoadError::Io { path: path.to_path_buf(), source })
}

pub fn load_task_corpus(path: &Path) -> Result<Vec<TaskSpec>, LoadError> {
    Ok(parse_task_corpus(&read(path)?)?.records)
}

pub fn load_candidates(path: &Path) -> Result<Vec<CandidateProgram>, LoadError> {
    Ok(parse_candidates(&read(path)?)?.records)
}

/// One record per line, in the canonical schema.
pub fn write_task_corpus(tasks: &[TaskSpec]) -> String {
    tasks.iter().map(|t| t.to_record().to_string() + "\n").collect()
}

pub fn write_candidates(candidates: &[CandidateProgram]) -> String {
    candidates.iter().map(|c| c.to_record().to_string() + "\n").collect()
}
