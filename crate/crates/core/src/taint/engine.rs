//! Intraprocedural taint propagation over one SSA scope, sink matching and
//! flow-path reconstruction along def-use chains.

use super::rules::{path_matches, CompiledPack, SafeSinkForm, SinkKind, SourceKind};
use crate::finding::{Hop, HopAnchor};
use crate::frontend::ast::{BinOp, Constant};
use crate::frontend::ir::*;
use crate::frontend::ssa::{DefSite, SsaProgram, ValueId};
use crate::frontend::Span;
use std::collections::HashSet;

/// Why a value became tainted; the pointer always refers to a value that
/// was tainted earlier, so following origins terminates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Origin {
    /// A source call, attribute or import.
    Source,
    /// A parameter tainted by the calling context.
    Param(usize),
    /// A free variable tainted in its defining scope.
    Free,
    /// A tainted operand of the defining instruction.
    Operand(ValueId),
    /// A tainted φ operand.
    Phi(ValueId),
    /// Result of a call to a local function whose body produces taint.
    Callee,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FixpointStats {
    /// Round-robin passes over the scope, including the final stable pass.
    pub passes: usize,
    /// Number of values raised from untainted to tainted.
    pub updates: usize,
}

/// Fixpoint of the taint lattice for one scope.
#[derive(Debug, Clone)]
pub struct TaintMap {
    tainted: Vec<bool>,
    origin: Vec<Option<Origin>>,
    pub stats: FixpointStats,
}

impl TaintMap {
    pub fn is_tainted(&self, v: ValueId) -> bool {
        self.tainted[v.index()]
    }

    pub fn origin(&self, v: ValueId) -> Option<Origin> {
        self.origin[v.index()]
    }

    pub fn len(&self) -> usize {
        self.tainted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tainted.is_empty()
    }

    pub fn tainted_values(&self) -> impl Iterator<Item = ValueId> + '_ {
        self.tainted.iter().enumerate().filter(|(_, t)| **t).map(|(i, _)| ValueId(i as u32))
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.tainted
    }
}

/// Taint effect of a call resolved to a function defined in the same file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CallEffect {
    /// The callee returns taint regardless of its arguments.
    pub intrinsic: bool,
    /// Operand indices whose taint reaches the return value.
    pub flowing: Vec<usize>,
}

/// What the enclosing program knows about a scope's inputs.
pub trait TaintContext {
    fn param_tainted(&self, index: usize) -> bool;
    fn free_tainted(&self, name: &str) -> bool;
    /// `Some` when the call at `(block, index)` resolves to a local function.
    fn call_effect(&self, block: BlockId, index: usize) -> Option<CallEffect>;
}

/// Context for analyzing one scope on its own: parameters are tainted only
/// when the pack treats entry parameters as sources, and nothing is
/// resolved interprocedurally.
pub struct Standalone {
    params: Vec<bool>,
}

impl Standalone {
    pub fn new(cfg: &Cfg, rules: &CompiledPack) -> Self {
        let entry = rules.pack.has_entry_param_source();
        let params = (0..cfg.params.len()).map(|i| entry && !is_receiver_param(cfg, i)).collect();
        Standalone { params }
    }
}

impl TaintContext for Standalone {
    fn param_tainted(&self, index: usize) -> bool {
        self.params.get(index).copied().unwrap_or(false)
    }

    fn free_tainted(&self, _name: &str) -> bool {
        false
    }

    fn call_effect(&self, _block: BlockId, _index: usize) -> Option<CallEffect> {
        None
    }
}

/// `self`/`cls` of a method that is not a staticmethod.
pub fn is_receiver_param(cfg: &Cfg, index: usize) -> bool {
    index == 0 && cfg.kind == ScopeKind::Method && !has_decorator(cfg, "staticmethod")
}

pub fn has_decorator(cfg: &Cfg, name: &str) -> bool {
    cfg.decorators.iter().any(|d| d.dotted_name().is_some_and(|n| n == name || n.ends_with(&format!(".{name}"))))
}

pub fn is_sanitizer(rules: &CompiledPack, path: &str) -> bool {
    rules.pack.sanitizers.iter().any(|s| path_matches(&s.pattern, path))
}

fn is_source(rules: &CompiledPack, kind: SourceKind, path: &str) -> bool {
    rules.pack.sources.iter().any(|s| s.kind == kind && path_matches(&s.pattern, path))
}

/// Least fixpoint of the transfer functions for one scope.
pub fn propagate_with(ssa: &SsaProgram, rules: &CompiledPack, ctx: &dyn TaintContext) -> TaintMap {
    let cfg = &ssa.cfg;
    let mut map = TaintMap { tainted: vec![false; ssa.values.len()], origin: vec![None; ssa.values.len()], stats: FixpointStats::default() };
    // Call effects do not change during the fixpoint; look them up once.
    let effects: Vec<Vec<Option<CallEffect>>> = cfg
        .blocks
        .iter()
        .enumerate()
        .map(|(b, blk)| {
            blk.instrs
                .iter()
                .enumerate()
                .map(|(i, ins)| if matches!(ins.op, Op::Call(_)) { ctx.call_effect(b, i) } else { None })
                .collect()
        })
        .collect();
    loop {
        map.stats.passes += 1;
        let mut changed = false;
        for b in 0..cfg.blocks.len() {
            for phi in &ssa.phis[b] {
                if map.tainted[phi.dest.index()] {
                    continue;
                }
                if let Some(&(_, v)) = phi.incoming.iter().find(|(_, v)| map.tainted[v.index()]) {
                    map.tainted[phi.dest.index()] = true;
                    map.origin[phi.dest.index()] = Some(Origin::Phi(v));
                    changed = true;
                    map.stats.updates += 1;
                }
            }
            for (i, ins) in cfg.blocks[b].instrs.iter().enumerate() {
                let Some(d) = ssa.defs[b][i] else { continue };
                if map.tainted[d.index()] {
                    continue;
                }
                if let Some(o) = transfer(ssa, rules, ctx, &map, b, i, ins, effects[b][i].as_ref()) {
                    map.tainted[d.index()] = true;
                    map.origin[d.index()] = Some(o);
                    changed = true;
                    map.stats.updates += 1;
                }
            }
        }
        if !changed {
            return map;
        }
    }
}

/// Intraprocedural fixpoint with the standalone context.
pub fn propagate(ssa: &SsaProgram, rules: &CompiledPack) -> TaintMap {
    propagate_with(ssa, rules, &Standalone::new(&ssa.cfg, rules))
}

fn first_tainted(ssa: &SsaProgram, map: &TaintMap, b: BlockId, i: usize, only: Option<&[usize]>) -> Option<ValueId> {
    ssa.uses[b][i].iter().enumerate().find_map(|(k, u)| {
        let u = (*u)?;
        let allowed = only.is_none_or(|o| o.contains(&k));
        (allowed && map.tainted[u.index()]).then_some(u)
    })
}

#[allow(clippy::too_many_arguments)]
fn transfer(
    ssa: &SsaProgram,
    rules: &CompiledPack,
    ctx: &dyn TaintContext,
    map: &TaintMap,
    b: BlockId,
    i: usize,
    ins: &Instr,
    effect: Option<&CallEffect>,
) -> Option<Origin> {
    let operands = || first_tainted(ssa, map, b, i, None).map(Origin::Operand);
    match &ins.op {
        Op::Param(k) => ctx.param_tainted(*k).then_some(Origin::Param(*k)),
        Op::Entry(EntryKind::Free) => {
            let name = ssa.cfg.var_name(ins.dest?);
            ctx.free_tainted(name).then_some(Origin::Free)
        }
        Op::Entry(EntryKind::Undefined) | Op::Delete => None,
        Op::Import(path) => is_source(rules, SourceKind::Attribute, path).then_some(Origin::Source),
        Op::GetAttr { path, .. } => {
            if path.as_deref().is_some_and(|p| is_source(rules, SourceKind::Attribute, p)) {
                Some(Origin::Source)
            } else {
                operands()
            }
        }
        Op::Call(ci) => {
            if let Some(effect) = effect {
                if effect.intrinsic {
                    return Some(Origin::Callee);
                }
                return first_tainted(ssa, map, b, i, Some(&effect.flowing)).map(Origin::Operand);
            }
            let path = ci.path.as_deref().unwrap_or("");
            if !path.is_empty() && is_sanitizer(rules, path) {
                return None;
            }
            if !path.is_empty() && is_source(rules, SourceKind::Call, path) {
                return Some(Origin::Source);
            }
            operands()
        }
        _ => operands(),
    }
}

/// A tainted value reaching a dangerous sink position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SinkHit {
    pub block: BlockId,
    pub index: usize,
    /// `argument N`, `keyword NAME`, or `formatted text` for construct sinks.
    pub position: String,
    /// The tainted value at that position.
    pub value: ValueId,
    /// Display name of the sink (call path or construct).
    pub sink: String,
    pub span: Span,
}

/// Every tainted dangerous position in reachable code, in program order.
pub fn sink_hits(ssa: &SsaProgram, rules: &CompiledPack, map: &TaintMap) -> Vec<SinkHit> {
    let cfg = &ssa.cfg;
    let mut hits = Vec::new();
    let mut flagged_constructs: HashSet<ValueId> = HashSet::new();
    for b in 0..cfg.blocks.len() {
        if cfg.blocks[b].unreachable {
            continue;
        }
        for (i, ins) in cfg.blocks[b].instrs.iter().enumerate() {
            match &ins.op {
                Op::Call(ci) => call_hits(ssa, rules, map, b, i, ins, ci, &mut hits),
                Op::Format { literal, .. } => {
                    if let Some(v) = first_tainted(ssa, map, b, i, None) {
                        if let Some(sink) = construct_match(rules, literal) {
                            if let Some(d) = ssa.defs[b][i] {
                                flagged_constructs.insert(d);
                            }
                            hits.push(SinkHit { block: b, index: i, position: "formatted text".into(), value: v, sink, span: ins.span });
                        }
                    }
                }
                Op::BinOp(BinOp::Add) => {
                    let uses = &ssa.uses[b][i];
                    let mut lit = false;
                    let mut tainted = None;
                    for (k, u) in uses.iter().enumerate() {
                        let text = match u {
                            Some(u) => literal_text(ssa, *u),
                            None => match &ins.args[k] {
                                Operand::Const(Constant::Str(s)) => Some(s.clone()),
                                _ => None,
                            },
                        };
                        if text.is_some_and(|t| construct_match(rules, &t).is_some()) {
                            lit = true;
                        }
                        if let Some(u) = u {
                            if map.is_tainted(*u) && !flagged_constructs.contains(u) {
                                tainted = Some(*u);
                            }
                        }
                    }
                    if let (true, Some(v)) = (lit, tainted) {
                        let sink = construct_name(rules);
                        if let Some(d) = ssa.defs[b][i] {
                            flagged_constructs.insert(d);
                        }
                        hits.push(SinkHit { block: b, index: i, position: "concatenated text".into(), value: v, sink, span: ins.span });
                    } else if let Some(d) = ssa.defs[b][i] {
                        // Carry the flag through concatenation chains so one
                        // expression yields one finding.
                        if uses.iter().flatten().any(|u| flagged_constructs.contains(u)) {
                            flagged_constructs.insert(d);
                        }
                    }
                }
                _ => {}
            }
        }
    }
    hits
}

fn construct_match(rules: &CompiledPack, literal: &str) -> Option<String> {
    rules.pack.sinks.iter().zip(&rules.construct).find_map(|(s, re)| {
        let re = re.as_ref()?;
        (s.kind == SinkKind::Construct && re.is_match(literal)).then(|| format!("markup built from /{}/", s.pattern))
    })
}

fn construct_name(rules: &CompiledPack) -> String {
    rules
        .pack
        .sinks
        .iter()
        .find(|s| s.kind == SinkKind::Construct)
        .map(|s| format!("markup built from /{}/", s.pattern))
        .unwrap_or_default()
}

#[allow(clippy::too_many_arguments)]
fn call_hits(
    ssa: &SsaProgram,
    rules: &CompiledPack,
    map: &TaintMap,
    b: BlockId,
    i: usize,
    ins: &Instr,
    ci: &CallInfo,
    hits: &mut Vec<SinkHit>,
) {
    let Some(path) = ci.path.as_deref() else { return };
    let uses = &ssa.uses[b][i];
    let mut positions: Vec<(String, Vec<usize>)> = Vec::new();
    let mut sink_name = None;
    for s in rules.pack.sinks.iter().filter(|s| s.kind == SinkKind::Call && path_matches(&s.pattern, path)) {
        sink_name.get_or_insert_with(|| path.to_string());
        for &k in &s.args {
            let label = format!("argument {k}");
            if positions.iter().any(|(l, _)| *l == label) {
                continue;
            }
            let mut ops = Vec::new();
            if k < ci.positional && !ci.starred.iter().any(|&st| st <= k) {
                ops.push(ci.positional_operand(k));
            } else {
                ops.extend(ci.starred.iter().filter(|&&st| st <= k).map(|&st| ci.positional_operand(st)));
            }
            ops.extend(double_star_operands(ci));
            positions.push((label, ops));
        }
        if s.receiver && ci.has_receiver && !positions.iter().any(|(l, _)| l == "receiver") {
            positions.push(("receiver".into(), vec![0]));
        }
        for kw in &s.keywords {
            let label = format!("keyword {kw}");
            if positions.iter().any(|(l, _)| *l == label) {
                continue;
            }
            let mut ops: Vec<usize> = ci
                .keywords
                .iter()
                .enumerate()
                .filter(|(_, n)| n.as_deref() == Some(kw.as_str()))
                .map(|(j, _)| ci.keyword_operand(j))
                .collect();
            ops.extend(double_star_operands(ci));
            positions.push((label, ops));
        }
    }
    let Some(sink) = sink_name else { return };
    if is_safe_form(ssa, rules, map, b, i, ins, ci, path) {
        return;
    }
    for (label, ops) in positions {
        let tainted = ops.iter().find_map(|&k| uses.get(k).copied().flatten().filter(|u| map.is_tainted(*u)));
        if let Some(v) = tainted {
            hits.push(SinkHit { block: b, index: i, position: label, value: v, sink: sink.clone(), span: ins.span });
        }
    }
}

fn double_star_operands(ci: &CallInfo) -> impl Iterator<Item = usize> + '_ {
    ci.keywords.iter().enumerate().filter(|(_, n)| n.is_none()).map(|(j, _)| ci.keyword_operand(j))
}

#[allow(clippy::too_many_arguments)]
fn is_safe_form(
    ssa: &SsaProgram,
    rules: &CompiledPack,
    map: &TaintMap,
    b: BlockId,
    i: usize,
    ins: &Instr,
    ci: &CallInfo,
    path: &str,
) -> bool {
    let uses = &ssa.uses[b][i];
    rules.pack.safe_sink_forms.iter().zip(&rules.placeholders).any(|(form, placeholders)| match form {
        SafeSinkForm::ParameterizedQuery { sinks, query_arg, .. } => {
            if !sinks.iter().any(|s| path_matches(s, path)) {
                return false;
            }
            let k = *query_arg;
            if k >= ci.positional || ci.starred.iter().any(|&s| s <= k) {
                return false;
            }
            let has_params = ci.positional > k + 1 || !ci.keywords.is_empty();
            let op = ci.positional_operand(k);
            let text = match (&ins.args[op], uses[op]) {
                (_, Some(v)) if map.is_tainted(v) => return false,
                (_, Some(v)) => literal_text(ssa, v),
                (Operand::Const(Constant::Str(s)), None) => Some(s.clone()),
                _ => None,
            };
            has_params && text.is_some_and(|t| placeholders.iter().any(|p| p.is_match(&t)))
        }
        SafeSinkForm::ArgvList { sinks, shell_keyword, shells } => {
            if !sinks.iter().any(|s| path_matches(s, path)) || ci.positional == 0 || !ci.starred.is_empty() {
                return false;
            }
            let shell_off = ci.keywords.iter().enumerate().all(|(j, n)| match n.as_deref() {
                None => false,
                Some(n) if n == shell_keyword => {
                    matches!(ins.args[ci.keyword_operand(j)], Operand::Const(Constant::Bool(false)) | Operand::Const(Constant::None))
                }
                Some(_) => true,
            });
            let Some(argv) = uses[ci.positional_operand(0)] else { return false };
            shell_off && argv_program(ssa, argv).is_some_and(|p| !shells.iter().any(|s| s == &p))
        }
    })
}

/// Program name of an argument list built in place: `["ls", ...]`.
fn argv_program(ssa: &SsaProgram, v: ValueId) -> Option<String> {
    let mut cur = v;
    for _ in 0..64 {
        let ins = ssa.def_instr(cur)?;
        match &ins.op {
            Op::Build(BuildKind::List | BuildKind::Tuple) => {
                return match ins.args.first()? {
                    Operand::Const(Constant::Str(s)) => Some(s.rsplit('/').next().unwrap_or(s).to_string()),
                    _ => None,
                };
            }
            Op::Copy | Op::Mutate(_) => {
                let DefSite::Instr { block, index } = ssa.values[cur.index()].def else { return None };
                cur = ssa.uses[block][index][0]?;
            }
            _ => return None,
        }
    }
    None
}

/// Text of a value built only from string literals (copies, `+`, and
/// formatting without interpolated values).
pub fn literal_text(ssa: &SsaProgram, v: ValueId) -> Option<String> {
    literal_text_depth(ssa, v, 0)
}

fn literal_text_depth(ssa: &SsaProgram, v: ValueId, depth: usize) -> Option<String> {
    if depth > 64 {
        return None;
    }
    let DefSite::Instr { block, index } = ssa.values[v.index()].def else {
        let DefSite::Phi { block, index } = ssa.values[v.index()].def else { unreachable!() };
        let phi = ssa.phi(block, index);
        let mut texts = phi.incoming.iter().map(|(_, u)| literal_text_depth(ssa, *u, depth + 1));
        let first = texts.next()??;
        return texts.all(|t| t.as_deref() == Some(first.as_str())).then_some(first);
    };
    let ins = &ssa.cfg.blocks[block].instrs[index];
    let part = |k: usize| -> Option<String> {
        match (&ins.args[k], ssa.uses[block][index][k]) {
            (Operand::Const(Constant::Str(s)), _) => Some(s.clone()),
            (_, Some(u)) => literal_text_depth(ssa, u, depth + 1),
            _ => None,
        }
    };
    match &ins.op {
        Op::Copy => part(0),
        Op::BinOp(BinOp::Add) => Some(part(0)? + &part(1)?),
        Op::Format { literal, .. } if ins.args.is_empty() => Some(literal.clone()),
        _ => None,
    }
}

/// One link in a backward walk from a sink to its source.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Root {
    Source,
    Param(usize),
    Free,
    Callee { block: BlockId, index: usize },
}

/// Origin chain ending at `v`, ordered source-first, plus how it started.
pub fn origin_chain(ssa: &SsaProgram, map: &TaintMap, v: ValueId) -> (Vec<ValueId>, Root) {
    let mut chain = vec![v];
    let mut cur = v;
    let root = loop {
        match map.origin(cur) {
            Some(Origin::Operand(u)) | Some(Origin::Phi(u)) => {
                chain.push(u);
                cur = u;
            }
            Some(Origin::Param(i)) => break Root::Param(i),
            Some(Origin::Free) => break Root::Free,
            Some(Origin::Callee) => {
                let DefSite::Instr { block, index } = ssa.values[cur.index()].def else { break Root::Source };
                break Root::Callee { block, index };
            }
            Some(Origin::Source) | None => break Root::Source,
        }
    };
    chain.reverse();
    (chain, root)
}

/// Hop for the definition of `v`.
pub fn value_hop(scope: ScopeId, ssa: &SsaProgram, v: ValueId) -> Hop {
    match ssa.values[v.index()].def {
        DefSite::Instr { block, index } => instr_hop(scope, ssa, block, index),
        DefSite::Phi { block, index } => {
            let span = ssa.block_span(block);
            let phi = ssa.phi(block, index);
            let ins: Vec<String> = phi.incoming.iter().map(|(_, u)| ssa.value_name(*u)).collect();
            Hop {
                line: span.line,
                col: span.col,
                text: format!("{} joins here", ssa.cfg.var_name(phi.var)),
                note: format!("{} = phi({})", ssa.value_name(phi.dest), ins.join(", ")),
                anchor: HopAnchor { scope, block, index: None, phi: index },
            }
        }
    }
}

pub fn instr_hop(scope: ScopeId, ssa: &SsaProgram, block: BlockId, index: usize) -> Hop {
    let ins = &ssa.cfg.blocks[block].instrs[index];
    let span = match ins.op {
        Op::Param(_) => ins.span,
        Op::Entry(_) => ssa.cfg.span,
        _ => ins.span,
    };
    let args: Vec<String> = ssa.uses[block][index]
        .iter()
        .zip(&ins.args)
        .map(|(u, a)| match u {
            Some(u) => ssa.value_name(*u),
            None => ssa.cfg.render_operand(a),
        })
        .collect();
    let dest = ssa.defs[block][index].map(|d| ssa.value_name(d));
    Hop {
        line: span.line,
        col: span.col,
        text: ssa.cfg.line_text(span.line).to_string(),
        note: ssa.cfg.render_instr_with(ins, dest, &args),
        anchor: HopAnchor { scope, block, index: Some(index), phi: 0 },
    }
}

/// Findings of one scope analyzed on its own.
pub fn find_flows(ssa: &SsaProgram, rules: &CompiledPack, taint: &TaintMap) -> Vec<crate::finding::Finding> {
    let mut out: Vec<crate::finding::Finding> = sink_hits(ssa, rules, taint)
        .into_iter()
        .map(|hit| {
            let (chain, _) = origin_chain(ssa, taint, hit.value);
            let mut hops: Vec<Hop> = chain.iter().map(|&v| value_hop(ssa.cfg.id, ssa, v)).collect();
            hops.push(instr_hop(ssa.cfg.id, ssa, hit.block, hit.index));
            make_finding(rules, &hit, hops)
        })
        .collect();
    crate::finding::sort_findings(&mut out);
    out
}

pub fn make_finding(rules: &CompiledPack, hit: &SinkHit, hops: Vec<Hop>) -> crate::finding::Finding {
    use crate::finding::{Evidence, Finding, FindingKind, Severity};
    let cwe = rules.pack.cwe;
    let label = cwe.short_name().unwrap_or(&rules.pack.name);
    Finding {
        cwe_id: Some(cwe),
        kind: FindingKind::Vulnerability,
        severity: Severity::Vulnerability,
        message: format!("{label}: untrusted data reaches {} ({})", hit.sink, hit.position),
        span: hit.span,
        evidence: Evidence::Flow(hops),
    }
}
