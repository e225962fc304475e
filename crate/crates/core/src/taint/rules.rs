//! Rule packs: declarative sources, sinks, sanitizers and safe sink forms
//! for one CWE category.

use crate::finding::CweId;
use regex::Regex;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    #[default]
    Taint,
    Structural,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    /// Result of a matching call (`input()`, `request.args.get(..)`).
    #[default]
    Call,
    /// Attribute load or imported name (`request.form`, `sys.argv`).
    Attribute,
    /// Parameters of functions never called within the file. `pattern` is
    /// ignored; the receiver parameter of methods is excluded.
    EntryParam,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourcePattern {
    #[serde(default)]
    pub pattern: String,
    #[serde(default)]
    pub kind: SourceKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SinkKind {
    /// A call; `args`/`keywords` name the dangerous argument positions.
    #[default]
    Call,
    /// A string built by formatting whose literal text matches `pattern`
    /// (a regular expression), e.g. an HTML fragment.
    Construct,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SinkPattern {
    pub pattern: String,
    #[serde(default)]
    pub kind: SinkKind,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub keywords: Vec<String>,
    /// The receiver of a method call is dangerous (`Path(p).read_text()`).
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub receiver: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SanitizerPattern {
    pub pattern: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SafeSinkForm {
    /// `execute(LITERAL_WITH_PLACEHOLDERS, params)`: the query argument is an
    /// untainted literal (or literal concatenation) containing at least one
    /// placeholder, and parameters are passed separately.
    ParameterizedQuery {
        sinks: Vec<String>,
        #[serde(default)]
        query_arg: usize,
        /// Regular expressions; one must match inside the literal.
        placeholders: Vec<String>,
    },
    /// Process spawn with an argument list whose program is a constant
    /// string and no shell.
    ArgvList {
        sinks: Vec<String>,
        #[serde(default = "default_shell_keyword")]
        shell_keyword: String,
        #[serde(default)]
        shells: Vec<String>,
    },
}

fn default_shell_keyword() -> String {
    "shell".into()
}

/// Configuration of the structural (non-taint) CSRF detector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuralRules {
    /// Decorator call names that register a request handler (`route`, `post`).
    pub handler_decorators: Vec<String>,
    /// Decorators that imply a state-changing method by name (`post`, `put`).
    pub state_changing_decorators: Vec<String>,
    /// HTTP methods that change state.
    pub state_changing_methods: Vec<String>,
    /// Calls that validate an anti-forgery token.
    pub token_checks: Vec<String>,
    /// Regular expression matched against identifiers and string constants
    /// compared inside a handler (`csrf_token` lookups).
    pub token_mention: String,
    /// Calls that enable protection globally (`CSRFProtect`).
    #[serde(default)]
    pub global_protection: Vec<String>,
    /// Decorators that opt a handler out of global protection.
    #[serde(default)]
    pub exempt_markers: Vec<String>,
    /// Parameter names that mark a function-level request handler.
    #[serde(default)]
    pub request_params: Vec<String>,
    /// Calls that mutate server state (for function-level handlers).
    #[serde(default)]
    pub state_change_calls: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RulePack {
    pub cwe: CweId,
    pub name: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub detector: DetectorKind,
    #[serde(default)]
    pub sources: Vec<SourcePattern>,
    #[serde(default)]
    pub sinks: Vec<SinkPattern>,
    #[serde(default)]
    pub sanitizers: Vec<SanitizerPattern>,
    #[serde(default)]
    pub safe_sink_forms: Vec<SafeSinkForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub structural: Option<StructuralRules>,
    /// Documented false-negative shapes.
    #[serde(default)]
    pub known_false_negatives: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("malformed pattern {pattern:?}: {reason}")]
    BadPattern { pattern: String, reason: String },
    #[error("pack {0} has no sinks: pack can never fire")]
    NoSinks(CweId),
    #[error("pack {0} has no sources: pack can never fire")]
    NoSources(CweId),
    #[error("pack {0} is structural but has no [structural] rules")]
    NoStructural(CweId),
}

fn bad(pattern: &str, reason: impl Into<String>) -> RuleError {
    RuleError::BadPattern { pattern: pattern.to_string(), reason: reason.into() }
}

/// Validates a dotted call/attribute pattern: identifiers separated by dots,
/// each optionally followed by `()` or `[]`.
pub fn validate_path_pattern(p: &str) -> Result<(), RuleError> {
    if p.is_empty() {
        return Err(bad(p, "empty pattern"));
    }
    for seg in p.split('.') {
        let core = seg.trim_end_matches("()").trim_end_matches("[]");
        let mut chars = core.chars();
        match chars.next() {
            Some(c) if c.is_alphabetic() || c == '_' => {}
            _ => return Err(bad(p, format!("segment {seg:?} is not an identifier"))),
        }
        if !chars.all(|c| c.is_alphanumeric() || c == '_') {
            return Err(bad(p, format!("segment {seg:?} is not an identifier")));
        }
    }
    Ok(())
}

fn compile_regex(p: &str) -> Result<Regex, RuleError> {
    Regex::new(p).map_err(|e| bad(p, e.to_string()))
}

impl RulePack {
    pub fn validate(&self) -> Result<(), RuleError> {
        self.compile().map(|_| ())
    }

    pub fn compile(&self) -> Result<CompiledPack, RuleError> {
        match self.detector {
            DetectorKind::Structural => {
                let s = self.structural.as_ref().ok_or(RuleError::NoStructural(self.cwe))?;
                for p in s.handler_decorators.iter().chain(&s.token_checks).chain(&s.global_protection) {
                    validate_path_pattern(p)?;
                }
                compile_regex(&s.token_mention)?;
            }
            DetectorKind::Taint => {
                if self.sinks.is_empty() {
                    return Err(RuleError::NoSinks(self.cwe));
                }
                if self.sources.is_empty() {
                    return Err(RuleError::NoSources(self.cwe));
                }
            }
        }
        for s in &self.sources {
            if s.kind != SourceKind::EntryParam {
                validate_path_pattern(&s.pattern)?;
            }
        }
        let mut construct = Vec::new();
        for s in &self.sinks {
            match s.kind {
                SinkKind::Call => {
                    validate_path_pattern(&s.pattern)?;
                    if s.args.is_empty() && s.keywords.is_empty() && !s.receiver {
                        return Err(bad(&s.pattern, "sink names no dangerous argument"));
                    }
                    construct.push(None);
                }
                SinkKind::Construct => construct.push(Some(compile_regex(&s.pattern)?)),
            }
        }
        for s in &self.sanitizers {
            validate_path_pattern(&s.pattern)?;
        }
        let mut placeholders = Vec::new();
        for f in &self.safe_sink_forms {
            let mut res = Vec::new();
            match f {
                SafeSinkForm::ParameterizedQuery { sinks, placeholders: ps, .. } => {
                    for s in sinks {
                        validate_path_pattern(s)?;
                    }
                    if ps.is_empty() {
                        return Err(bad("placeholders", "parameterized form needs at least one placeholder"));
                    }
                    for p in ps {
                        res.push(compile_regex(p)?);
                    }
                }
                SafeSinkForm::ArgvList { sinks, .. } => {
                    for s in sinks {
                        validate_path_pattern(s)?;
                    }
                }
            }
            placeholders.push(res);
        }
        Ok(CompiledPack { pack: self.clone(), construct, placeholders })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("rule pack serializes")
    }

    pub fn has_entry_param_source(&self) -> bool {
        self.sources.iter().any(|s| s.kind == SourceKind::EntryParam)
    }
}

/// A validated pack with its regular expressions compiled.
#[derive(Debug, Clone)]
pub struct CompiledPack {
    pub pack: RulePack,
    /// Per sink: compiled regex for construct sinks.
    pub construct: Vec<Option<Regex>>,
    /// Per safe form: compiled placeholder regexes.
    pub placeholders: Vec<Vec<Regex>>,
}

/// Case-sensitive suffix match on dotted segments: `execute` matches
/// `cur.execute` and `db.cursor().execute`; `cursor.execute` matches
/// `db.cursor.execute` and `db.cursor().execute` (a call marker on a path
/// segment is ignored unless the pattern spells it).
pub fn path_matches(pattern: &str, path: &str) -> bool {
    let pat: Vec<&str> = pattern.split('.').collect();
    let segs: Vec<&str> = path.split('.').collect();
    if pat.len() > segs.len() {
        return false;
    }
    let tail = &segs[segs.len() - pat.len()..];
    pat.iter().zip(tail).all(|(p, s)| p == s || (!p.ends_with("()") && s.strip_suffix("()") == Some(p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suffix_matching() {
        assert!(path_matches("execute", "cur.execute"));
        assert!(path_matches("execute", "sqlite3.connect().cursor().execute"));
        assert!(path_matches("subprocess.run", "subprocess.run"));
        assert!(!path_matches("subprocess.run", "run"));
        assert!(path_matches("request.args.get", "flask.request.args.get"));
        assert!(!path_matches("execute", "cur.executemany"));
        assert!(!path_matches("Execute", "cur.execute"));
        assert!(path_matches("request.args", "request.args"));
        assert!(path_matches("connect", "sqlite3.connect()"));
    }

    #[test]
    fn pattern_validation() {
        assert!(validate_path_pattern("os.system").is_ok());
        assert!(validate_path_pattern("connect().cursor").is_ok());
        assert!(validate_path_pattern("os..system").is_err());
        assert!(validate_path_pattern("").is_err());
        assert!(validate_path_pattern("1abc").is_err());
    }
}
