//! Maintainability checks: missing annotations, type mismatches, unreachable
//! code, inconsistent signatures and unused code.

pub mod types;

use crate::finding::{Evidence, Finding, FindingKind, Severity};
use crate::frontend::ast::{Expr, ExprKind, FunctionDef, Module, Stmt, StmtKind};
use crate::frontend::ir::*;
use crate::frontend::{analyze_source, Analyzed, Span, SsaProgram, SyntaxFailure};
use crate::taint::program::CallGraph;
use serde::Serialize;
use std::collections::{BTreeSet, HashSet, VecDeque};
pub use types::{Declared, Signature, Ty, TypeEnv};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaintainabilityReport {
    pub findings: Vec<Finding>,
}

impl MaintainabilityReport {
    pub fn is_clean(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn count(&self, kind: FindingKind) -> usize {
        self.findings.iter().filter(|f| f.kind == kind).count()
    }
}

/// Per-kind counts, for summaries.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct KindCounts {
    pub missing_annotation: usize,
    pub type_mismatch: usize,
    pub unreachable_code: usize,
    pub signature_inconsistency: usize,
    pub unused_code: usize,
}

impl From<&MaintainabilityReport> for KindCounts {
    fn from(r: &MaintainabilityReport) -> Self {
        KindCounts {
            missing_annotation: r.count(FindingKind::MissingAnnotation),
            type_mismatch: r.count(FindingKind::TypeMismatch),
            unreachable_code: r.count(FindingKind::UnreachableCode),
            signature_inconsistency: r.count(FindingKind::SignatureInconsistency),
            unused_code: r.count(FindingKind::UnusedCode),
        }
    }
}

fn finding(kind: FindingKind, span: Span, message: String, text: &str) -> Finding {
    Finding {
        cwe_id: None,
        kind,
        severity: Severity::Maintainability,
        message,
        span,
        evidence: Evidence::Location { span, text: text.trim().to_string() },
    }
}

fn line_of(lines: &[String], line: u32) -> &str {
    crate::frontend::ast::line_text(lines, line)
}

/// 1-based column of the first non-blank character of `line`.
fn indent_col(lines: &[String], line: u32) -> u32 {
    let raw = (line as usize).checked_sub(1).and_then(|i| lines.get(i)).map(String::as_str).unwrap_or("");
    (raw.len() - raw.trim_start().len()) as u32 + 1
}

fn source_lines(source: &str) -> Vec<String> {
    source.lines().map(str::to_string).collect()
}

fn is_staticmethod(def: &FunctionDef) -> bool {
    def.decorators.iter().any(|d| d.dotted_name().is_some_and(|n| n.rsplit('.').next() == Some("staticmethod")))
}

/// Missing parameter and return annotations on module-level functions and
/// class methods. Nested functions and lambdas are exempt, as is the
/// receiver of methods. `__init__` needs no return annotation once one of
/// its other parameters is annotated.
pub fn check_annotations(module: &Module, source: &str) -> Vec<Finding> {
    let lines = source_lines(source);
    let mut out = Vec::new();
    for s in &module.body {
        match &s.kind {
            StmtKind::FunctionDef(def) => annotate_def(def, false, &lines, &mut out),
            StmtKind::ClassDef(c) => class_annotations(&c.body, &lines, &mut out),
            _ => walk_top_level(s, &lines, &mut out),
        }
    }
    out
}

/// Definitions under module-level `if`/`try` blocks count as top level.
fn walk_top_level(s: &Stmt, lines: &[String], out: &mut Vec<Finding>) {
    for body in s.bodies() {
        for inner in body {
            match &inner.kind {
                StmtKind::FunctionDef(def) => annotate_def(def, false, lines, out),
                StmtKind::ClassDef(c) => class_annotations(&c.body, lines, out),
                _ => walk_top_level(inner, lines, out),
            }
        }
    }
}

fn class_annotations(body: &[Stmt], lines: &[String], out: &mut Vec<Finding>) {
    for s in body {
        match &s.kind {
            StmtKind::FunctionDef(def) => annotate_def(def, true, lines, out),
            StmtKind::ClassDef(c) => class_annotations(&c.body, lines, out),
            _ => {}
        }
    }
}

fn annotate_def(def: &FunctionDef, is_method: bool, lines: &[String], out: &mut Vec<Finding>) {
    let skip = usize::from(is_method && !is_staticmethod(def) && !def.params.is_empty());
    let text = line_of(lines, def.span.line);
    let mut any_param_annotated = false;
    for p in def.params.iter().skip(skip) {
        if p.annotation.is_some() {
            any_param_annotated = true;
            continue;
        }
        out.push(finding(
            FindingKind::MissingAnnotation,
            def.span,
            format!("parameter `{}` of `{}` has no type annotation", p.name, def.name),
            text,
        ));
    }
    let init_exempt = is_method && def.name == "__init__" && any_param_annotated;
    if def.returns.is_none() && !init_exempt {
        out.push(finding(
            FindingKind::MissingAnnotation,
            def.span,
            format!("function `{}` has no return type annotation", def.name),
            text,
        ));
    }
}

/// Type environments and signatures for every scope of a program.
pub struct Typed {
    pub envs: Vec<TypeEnv>,
    pub sigs: Vec<Signature>,
    pub graph: CallGraph,
}

pub fn infer_types(ssa: &[SsaProgram]) -> Typed {
    let sigs: Vec<Signature> = ssa.iter().map(|p| Signature::of(&p.cfg)).collect();
    let graph = CallGraph::build(ssa);
    let envs = (0..ssa.len()).map(|s| types::infer(ssa, s, &sigs, &graph)).collect();
    Typed { envs, sigs, graph }
}

fn callee_name(ssa: &[SsaProgram], s: ScopeId) -> &str {
    &ssa[s].cfg.name
}

/// Operator and assignment mismatches between known types, and call
/// arguments that contradict a declared parameter annotation.
pub fn check_types(ssa: &[SsaProgram], typed: &Typed) -> Vec<Finding> {
    let mut out = Vec::new();
    for (scope, prog) in ssa.iter().enumerate() {
        let cfg = &prog.cfg;
        let env = &typed.envs[scope];
        for (b, blk) in cfg.blocks.iter().enumerate() {
            if blk.unreachable {
                continue;
            }
            for (i, ins) in blk.instrs.iter().enumerate() {
                if ins.synthetic {
                    continue;
                }
                let t = |k: usize| env.operand(prog, b, i, k);
                let text = cfg.line_text(ins.span.line);
                let mut push = |msg: String| out.push(finding(FindingKind::TypeMismatch, ins.span, msg, text));
                match &ins.op {
                    Op::BinOp(op) if types::binop_type(*op, t(0), t(1)).is_err() => {
                        push(format!("unsupported operand types for {} ({} and {})", op.symbol(), t(0), t(1)))
                    }
                    Op::UnaryOp(op) if types::unary_type(*op, t(0)).is_err() => {
                        push(format!("unsupported operand type for unary {} ({})", types::unary_symbol(*op), t(0)))
                    }
                    Op::Compare(ops) => {
                        for (k, op) in ops.iter().enumerate() {
                            if types::ordering_mismatch(*op, t(k), t(k + 1)) {
                                push(format!("unsupported operand types for {} ({} and {})", types::cmp_symbol(*op), t(k), t(k + 1)));
                            }
                        }
                    }
                    Op::Call(_) => {
                        for bd in typed.graph.bindings(scope, b, i) {
                            for (operand, params) in bd.params.iter().enumerate() {
                                for &p in params {
                                    let Some(Some(decl)) = typed.sigs[bd.callee].params.get(p) else { continue };
                                    let got = t(operand);
                                    if decl.rejects(got) {
                                        push(format!(
                                            "argument `{}` to `{}` has type {got}, expected {decl}",
                                            ssa[bd.callee].cfg.params[p].name,
                                            callee_name(ssa, bd.callee)
                                        ));
                                    }
                                }
                            }
                        }
                    }
                    _ => {}
                }
                let Some(dest) = ins.dest else { continue };
                let Some(decl) = env.declared.get(&dest) else { continue };
                if matches!(ins.op, Op::Entry(_) | Op::Param(_) | Op::Mutate(_) | Op::StoreAttr(_) | Op::StoreItem) {
                    continue;
                }
                let got = types::instr_type(prog, b, i, &t, &typed.graph, &typed.sigs);
                if decl.rejects(got) {
                    push(format!("assignment of {got} to `{}` declared {decl}", cfg.var_name(dest)));
                }
            }
        }
    }
    out
}

/// Maximal connected regions of unreachable blocks that hold user code.
pub fn unreachable_regions(cfg: &Cfg) -> Vec<Vec<BlockId>> {
    let dead: Vec<bool> = cfg.blocks.iter().map(|b| b.unreachable).collect();
    let mut seen = vec![false; cfg.blocks.len()];
    let mut regions = Vec::new();
    for start in 0..cfg.blocks.len() {
        if !dead[start] || seen[start] {
            continue;
        }
        let mut region = Vec::new();
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(b) = queue.pop_front() {
            region.push(b);
            let neighbours = cfg.succs(b).map(|e| e.to).chain(cfg.preds(b).map(|e| e.from)).collect::<Vec<_>>();
            for n in neighbours {
                if dead[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            }
        }
        if region.iter().any(|&b| cfg.blocks[b].instrs.iter().any(|i| !i.synthetic)) {
            region.sort_unstable();
            regions.push(region);
        }
    }
    regions
}

/// One finding per unreachable region, at the start of its first statement.
pub fn check_unreachable(cfg: &Cfg) -> Vec<Finding> {
    unreachable_regions(cfg)
        .into_iter()
        .map(|region| {
            let line = region
                .iter()
                .flat_map(|&b| cfg.blocks[b].instrs.iter())
                .filter(|i| !i.synthetic)
                .map(|i| i.span.line)
                .min()
                .unwrap_or(cfg.span.line);
            let col = indent_col(&cfg.lines, line);
            finding(FindingKind::UnreachableCode, Span::new(line, col), "unreachable code".into(), cfg.line_text(line))
        })
        .collect()
}

fn is_generator(cfg: &Cfg) -> bool {
    cfg.blocks.iter().flat_map(|b| &b.instrs).any(|i| matches!(i.op, Op::Unknown(w) if w.starts_with("yield")))
}

/// Control can reach the end of the body and return `None` implicitly.
pub fn falls_off_end(cfg: &Cfg) -> bool {
    !cfg.blocks[cfg.body_end].unreachable
}

/// Return statements that contradict the declared return annotation, and
/// functions that can fall off the end under an annotation excluding `None`.
pub fn check_signatures(ssa: &[SsaProgram], typed: &Typed) -> Vec<Finding> {
    let mut out = Vec::new();
    for (scope, prog) in ssa.iter().enumerate() {
        let cfg = &prog.cfg;
        if !cfg.is_function_like() || is_generator(cfg) {
            continue;
        }
        let Some(decl) = &typed.sigs[scope].returns else { continue };
        let env = &typed.envs[scope];
        for (b, blk) in cfg.blocks.iter().enumerate() {
            if blk.unreachable {
                continue;
            }
            for (i, ins) in blk.instrs.iter().enumerate() {
                if ins.op != Op::Return {
                    continue;
                }
                let text = cfg.line_text(ins.span.line);
                let msg = if ins.args.is_empty() {
                    (!decl.accepts_none()).then(|| format!("`{}` returns no value but is declared {decl}", cfg.name))
                } else {
                    let got = env.operand(prog, b, i, 0);
                    decl.rejects(got).then(|| format!("`{}` returns {got} but is declared {decl}", cfg.name))
                };
                if let Some(msg) = msg {
                    out.push(finding(FindingKind::SignatureInconsistency, ins.span, msg, text));
                }
            }
        }
        if !decl.accepts_none() && falls_off_end(cfg) {
            out.push(finding(
                FindingKind::SignatureInconsistency,
                cfg.span,
                format!("`{}` is declared {decl} but can end without returning a value", cfg.name),
                cfg.line_text(cfg.span.line),
            ));
        }
    }
    out
}

/// Names read as free variables by `scope`'s nested scopes.
fn free_in_descendants(ssa: &[SsaProgram], scope: ScopeId) -> HashSet<&str> {
    let mut out = HashSet::new();
    let mut stack = vec![scope];
    while let Some(s) = stack.pop() {
        for (c, prog) in ssa.iter().enumerate() {
            if prog.cfg.parent == Some(s) {
                stack.push(c);
                out.extend(prog.cfg.vars.iter().filter(|v| v.kind == VarKind::Free).map(|v| v.name.as_str()));
            }
        }
    }
    out
}

/// Function-local variables that are assigned but never read, and imports
/// never referenced.
pub fn check_unused(module: &Module, ssa: &[SsaProgram], source: &str) -> Vec<Finding> {
    let mut out = Vec::new();
    for (scope, prog) in ssa.iter().enumerate() {
        let cfg = &prog.cfg;
        if !cfg.is_function_like() {
            continue;
        }
        let captured = free_in_descendants(ssa, scope);
        let iter_temps: HashSet<VarId> = cfg
            .blocks
            .iter()
            .flat_map(|b| &b.instrs)
            .filter(|i| matches!(i.op, Op::IterNext | Op::UnpackItem(_) | Op::UnpackStar))
            .filter_map(|i| i.dest)
            .collect();
        let mut read: HashSet<VarId> = HashSet::new();
        for (v, users) in prog.users.iter().enumerate() {
            if !users.is_empty() {
                read.insert(prog.values[v].var);
            }
        }
        let mut reported: HashSet<VarId> = HashSet::new();
        for blk in &cfg.blocks {
            for ins in &blk.instrs {
                let Some(dest) = ins.dest else { continue };
                let info = &cfg.vars[dest];
                let plain = matches!(ins.op, Op::Copy | Op::BinOp(_) | Op::UnaryOp(_) | Op::Compare(_) | Op::BoolOp(_)
                    | Op::IfExp | Op::Call(_) | Op::Format { .. } | Op::GetAttr { .. } | Op::GetItem | Op::Slice | Op::Build(_));
                let from_iter = matches!(ins.op, Op::Copy) && ins.args.first().and_then(Operand::var).is_some_and(|v| iter_temps.contains(&v));
                if ins.synthetic
                    || !plain
                    || from_iter
                    || info.kind != VarKind::Local
                    || info.name.starts_with('_')
                    || read.contains(&dest)
                    || captured.contains(info.name.as_str())
                    || !reported.insert(dest)
                {
                    continue;
                }
                out.push(finding(
                    FindingKind::UnusedCode,
                    Span::new(ins.span.line, indent_col(&cfg.lines, ins.span.line)),
                    format!("local variable `{}` is assigned but never used", info.name),
                    cfg.line_text(ins.span.line),
                ));
            }
        }
    }
    out.extend(unused_imports(module, source));
    out
}

fn unused_imports(module: &Module, source: &str) -> Vec<Finding> {
    let lines = source_lines(source);
    let mut bound: Vec<(String, Span)> = Vec::new();
    let mut used: BTreeSet<String> = BTreeSet::new();
    crate::frontend::ast::walk_stmts(&module.body, &mut |s: &Stmt| {
        match &s.kind {
            StmtKind::Import(names) => {
                for a in names {
                    let local = a.asname.clone().unwrap_or_else(|| a.name.split('.').next().unwrap_or(&a.name).to_string());
                    bound.push((local, a.span));
                }
            }
            StmtKind::ImportFrom { module: m, names, .. } if m.as_deref() != Some("__future__") => {
                for a in names.iter().filter(|a| a.name != "*") {
                    bound.push((a.asname.clone().unwrap_or_else(|| a.name.clone()), a.span));
                }
            }
            StmtKind::Assign { targets, value } => {
                if targets.iter().any(|t| matches!(&t.kind, ExprKind::Name(n) if n == "__all__")) {
                    if let ExprKind::List(items) | ExprKind::Tuple(items) = &value.kind {
                        used.extend(items.iter().filter_map(|e| e.as_str_constant()).map(str::to_string));
                    }
                }
            }
            _ => {}
        }
        let stores: Vec<&Expr> = match &s.kind {
            StmtKind::Assign { targets, .. } => targets.iter().collect(),
            _ => Vec::new(),
        };
        for e in s.exprs() {
            if stores.iter().any(|t| std::ptr::eq(*t, e)) && matches!(e.kind, ExprKind::Name(_)) {
                continue;
            }
            e.walk(&mut |x| {
                if let ExprKind::Name(n) = &x.kind {
                    used.insert(n.clone());
                }
            });
        }
    });
    bound
        .into_iter()
        .filter(|(name, _)| !used.contains(name))
        .map(|(name, span)| {
            let text = line_of(&lines, span.line);
            finding(FindingKind::UnusedCode, span, format!("`{name}` is imported but never used"), text)
        })
        .collect()
}

/// All maintainability checks over an analyzed program, sorted by
/// (line, column, kind).
pub fn verdict_for(analyzed: &Analyzed, source: &str) -> MaintainabilityReport {
    let typed = infer_types(&analyzed.ssa);
    let mut findings = check_annotations(&analyzed.module, source);
    findings.extend(check_types(&analyzed.ssa, &typed));
    for prog in &analyzed.ssa {
        findings.extend(check_unreachable(&prog.cfg));
    }
    findings.extend(check_signatures(&analyzed.ssa, &typed));
    findings.extend(check_unused(&analyzed.module, &analyzed.ssa, source));
    findings.sort_by(|a, b| (a.span, a.kind, &a.message).cmp(&(b.span, b.kind, &b.message)));
    findings.dedup_by(|a, b| a.span == b.span && a.kind == b.kind && a.message == b.message);
    MaintainabilityReport { findings }
}

pub fn maintainability_verdict(source: &str) -> Result<MaintainabilityReport, SyntaxFailure> {
    let analyzed = analyze_source(source)?;
    Ok(verdict_for(&analyzed, source))
}
