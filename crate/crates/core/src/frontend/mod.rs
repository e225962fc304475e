//! Source frontend: lexer, parser, CFG lowering and SSA construction.

pub mod ast;
pub mod ir;
pub mod lexer;
pub mod lower;
pub mod parser;
pub mod ssa;

pub use ast::{Module, Span};
pub use ir::Cfg;
pub use lower::{build_cfg, Program};
pub use ssa::{render_cfg, render_ssa, to_ssa, SsaProgram, ValueId};

use serde::Serialize;
use std::fmt;

/// The source could not be parsed; `span` points at the first error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SyntaxFailure {
    pub message: String,
    pub span: Span,
}

impl fmt::Display for SyntaxFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at {}: {}", self.span, self.message)
    }
}

impl std::error::Error for SyntaxFailure {}

/// Parses a whole source file. Total: any input yields a module or a failure.
pub fn parse(source: &str) -> Result<Module, SyntaxFailure> {
    parser::parse_module(source)
}

/// A parsed, lowered and SSA-converted source file.
#[derive(Debug, Clone)]
pub struct Analyzed {
    pub module: Module,
    pub program: Program,
    /// One SSA program per scope, indexed like `program.scopes`.
    pub ssa: Vec<SsaProgram>,
}

pub fn analyze_source(source: &str) -> Result<Analyzed, SyntaxFailure> {
    let module = parse(source)?;
    let program = build_cfg(&module);
    let ssa = program.scopes.iter().map(to_ssa).collect();
    Ok(Analyzed { module, program, ssa })
}

/// Textual dump of every scope's CFG (and SSA listing when `with_ssa`).
pub fn dump(analyzed: &Analyzed, with_ssa: bool) -> String {
    let mut out = String::new();
    for (cfg, ssa) in analyzed.program.scopes.iter().zip(&analyzed.ssa) {
        if with_ssa {
            out.push_str(&render_ssa(ssa));
        } else {
            out.push_str(&render_cfg(cfg));
        }
    }
    out
}
