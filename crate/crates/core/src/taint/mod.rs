//! Flow-sensitive, context-insensitive taint analysis over SSA, driven by
//! declarative rule packs.

pub mod engine;
pub mod program;
pub mod rules;

pub use engine::{find_flows, propagate, propagate_with, FixpointStats, Origin, TaintContext, TaintMap};
pub use program::{analyze_program, analyze_scopes, summarize_function, FunctionSummary, ProgramTaint};
pub use rules::{CompiledPack, RuleError, RulePack};
