//! CWE detector registry: built-in rule packs, extension packs loaded from
//! a directory, and dispatch by a task's CWE tags.

pub mod csrf;

use crate::finding::{sort_findings, CweId, Finding};
use crate::frontend::{analyze_source, Analyzed, SyntaxFailure};
use crate::taint::rules::{CompiledPack, DetectorKind, RuleError, RulePack};
use crate::taint::analyze_program;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Rule packs shipped with the library, as (file name, TOML text).
pub const BUILTIN_PACKS: &[(&str, &str)] = &[
    ("cwe-22.toml", include_str!("../../rulepacks/cwe-22.toml")),
    ("cwe-78.toml", include_str!("../../rulepacks/cwe-78.toml")),
    ("cwe-79.toml", include_str!("../../rulepacks/cwe-79.toml")),
    ("cwe-89.toml", include_str!("../../rulepacks/cwe-89.toml")),
    ("cwe-352.toml", include_str!("../../rulepacks/cwe-352.toml")),
];

#[derive(Debug, thiserror::Error)]
pub enum DetectError {
    #[error("unknown CWE id {id}; known ids: {}", known.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", "))]
    UnknownCwe { id: CweId, known: Vec<CweId> },
    #[error("cannot read rule pack {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed rule pack {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid rule pack {path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: RuleError,
    },
    #[error(transparent)]
    Syntax(#[from] SyntaxFailure),
}

/// Parses and validates a rule pack document.
pub fn parse_rulepack(text: &str, origin: &Path) -> Result<RulePack, DetectError> {
    let pack: RulePack =
        toml::from_str(text).map_err(|e| DetectError::Parse { path: origin.to_path_buf(), message: e.to_string() })?;
    pack.validate().map_err(|source| DetectError::Invalid { path: origin.to_path_buf(), source })?;
    Ok(pack)
}

pub fn load_rulepack(path: &Path) -> Result<RulePack, DetectError> {
    let text = std::fs::read_to_string(path).map_err(|source| DetectError::Io { path: path.to_path_buf(), source })?;
    parse_rulepack(&text, path)
}

/// Immutable map from CWE id to compiled rule pack.
#[derive(Debug, Clone)]
pub struct DetectorRegistry {
    packs: BTreeMap<CweId, Arc<CompiledPack>>,
}

impl Default for DetectorRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}

impl DetectorRegistry {
    pub fn empty() -> Self {
        DetectorRegistry { packs: BTreeMap::new() }
    }

    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        for (name, text) in BUILTIN_PACKS {
            let pack = parse_rulepack(text, Path::new(name)).expect("built-in pack is valid");
            reg.packs.insert(pack.cwe, Arc::new(pack.compile().expect("built-in pack compiles")));
        }
        reg
    }

    /// Built-in packs plus every `*.toml` in `dir`; extensions shadow
    /// built-ins with the same CWE id.
    pub fn with_extensions(dir: &Path) -> Result<Self, DetectError> {
        let mut reg = Self::builtin();
        let entries = std::fs::read_dir(dir).map_err(|source| DetectError::Io { path: dir.to_path_buf(), source })?;
        let mut files: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        files.sort();
        for f in files {
            let pack = load_rulepack(&f)?;
            reg.insert(pack, &f);
        }
        Ok(reg)
    }

    /// Adds a pack, replacing (with a warning) any pack for the same CWE.
    pub fn insert(&mut self, pack: RulePack, origin: &Path) {
        let compiled = pack.compile().expect("validated pack compiles");
        if self.packs.contains_key(&pack.cwe) {
            log::warn!("rule pack {} from {} shadows the existing {} pack", pack.name, origin.display(), pack.cwe);
        }
        self.packs.insert(pack.cwe, Arc::new(compiled));
    }

    pub fn get(&self, cwe: CweId) -> Option<&CompiledPack> {
        self.packs.get(&cwe).map(|p| p.as_ref())
    }

    pub fn known_ids(&self) -> Vec<CweId> {
        self.packs.keys().copied().collect()
    }

    pub fn packs(&self) -> impl Iterator<Item = &CompiledPack> {
        self.packs.values().map(|p| p.as_ref())
    }

    /// Rejects tags without a registered pack.
    pub fn check_tags(&self, tags: &[CweId]) -> Result<(), DetectError> {
        match tags.iter().find(|t| !self.packs.contains_key(t)) {
            Some(&id) => Err(DetectError::UnknownCwe { id, known: self.known_ids() }),
            None => Ok(()),
        }
    }
}

/// Findings of one pack on an analyzed file.
pub fn run_pack(analyzed: &Analyzed, pack: &CompiledPack) -> Vec<Finding> {
    match pack.pack.detector {
        DetectorKind::Taint => analyze_program(analyzed, pack).findings,
        DetectorKind::Structural => match &pack.pack.structural {
            Some(rules) => csrf::check_csrf(&analyzed.module, rules, pack.pack.cwe),
            None => Vec::new(),
        },
    }
}

/// Union of the findings of every pack named by `tags`, sorted by
/// (line, column, CWE).
pub fn detect(analyzed: &Analyzed, tags: &[CweId], registry: &DetectorRegistry) -> Result<Vec<Finding>, DetectError> {
    registry.check_tags(tags)?;
    let mut tags = tags.to_vec();
    tags.sort_unstable();
    tags.dedup();
    let mut out = Vec::new();
    for t in tags {
        out.extend(run_pack(analyzed, registry.get(t).expect("checked")));
    }
    sort_findings(&mut out);
    Ok(out)
}

/// Parses `source` and runs [`detect`].
pub fn detect_source(source: &str, tags: &[CweId], registry: &DetectorRegistry) -> Result<Vec<Finding>, DetectError> {
    registry.check_tags(tags)?;
    let analyzed = analyze_source(source)?;
    detect(&analyzed, tags, registry)
}
