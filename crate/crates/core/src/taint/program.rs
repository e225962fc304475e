//! Whole-file analysis: call resolution, function summaries and a global
//! fixpoint over parameter, free-variable and receiver taint.

use super::engine::*;
use super::rules::CompiledPack;
use crate::finding::{sort_findings, Finding, Hop, HopAnchor};
use crate::frontend::ast::ParamKind;
use crate::frontend::ir::*;
use crate::frontend::ssa::{DefSite, SsaProgram, ValueId};
use crate::frontend::Analyzed;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

/// Context-insensitive summary of one function.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FunctionSummary {
    /// Per parameter: taint on that parameter can reach a returned value.
    pub param_to_return: Vec<bool>,
    /// The function returns taint from sources in its own body.
    pub intrinsic_return: bool,
    /// Per parameter: taint on that parameter can reach a sink in the body.
    pub param_to_sink: Vec<bool>,
    /// The body contains a source-to-sink flow on its own.
    pub internal_flow: bool,
    /// Member of a recursive cycle; `param_to_return` is then all true.
    pub recursive: bool,
}

impl FunctionSummary {
    pub fn params_to_return(&self) -> bool {
        self.param_to_return.iter().any(|&b| b)
    }
}

/// A call site bound to a function defined in the same file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub callee: ScopeId,
    /// Per call operand: the callee parameters it binds.
    pub params: Vec<Vec<usize>>,
    /// The call returns the callee's return value (false for constructors).
    pub returns: bool,
}

type Sites = Vec<Vec<Vec<Binding>>>;

/// Resolved call sites of every scope: `[scope][block][instr]`.
pub struct CallGraph {
    pub sites: Vec<Sites>,
}

impl CallGraph {
    pub fn build(ssa: &[SsaProgram]) -> CallGraph {
        let cfgs: Vec<&Cfg> = ssa.iter().map(|s| &s.cfg).collect();
        let mut makes: Vec<HashMap<String, Vec<(bool, ScopeId)>>> = vec![HashMap::new(); cfgs.len()];
        for cfg in &cfgs {
            for blk in &cfg.blocks {
                for ins in &blk.instrs {
                    let (Some(d), Some(target)) = (ins.dest, made_scope(&ins.op)) else { continue };
                    let is_class = matches!(ins.op, Op::MakeClass(_));
                    makes[cfg.id].entry(cfg.var_name(d).to_string()).or_default().push((is_class, target));
                }
            }
        }
        let mut methods: BTreeMap<&str, Vec<ScopeId>> = BTreeMap::new();
        for cfg in &cfgs {
            if cfg.kind == ScopeKind::Method {
                methods.entry(cfg.name.as_str()).or_default().push(cfg.id);
            }
        }
        let imported_roots: HashSet<String> = import_roots(&cfgs);
        let sites = cfgs
            .iter()
            .map(|cfg| {
                cfg.blocks
                    .iter()
                    .map(|blk| {
                        blk.instrs
                            .iter()
                            .map(|ins| match &ins.op {
                                Op::Call(ci) => resolve(&cfgs, &makes, &methods, &imported_roots, cfg, ci),
                                _ => Vec::new(),
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        CallGraph { sites }
    }

    pub fn bindings(&self, scope: ScopeId, block: BlockId, index: usize) -> &[Binding] {
        &self.sites[scope][block][index]
    }

    /// Every resolved call site: (caller scope, block, index, binding).
    pub fn all_sites(&self) -> impl Iterator<Item = (ScopeId, BlockId, usize, &Binding)> {
        self.sites.iter().enumerate().flat_map(|(s, blocks)| {
            blocks.iter().enumerate().flat_map(move |(b, instrs)| {
                instrs.iter().enumerate().flat_map(move |(i, bs)| bs.iter().map(move |bd| (s, b, i, bd)))
            })
        })
    }
}

fn made_scope(op: &Op) -> Option<ScopeId> {
    match op {
        Op::MakeFunction(s) | Op::MakeClass(s) => Some(*s),
        _ => None,
    }
}

fn import_roots(cfgs: &[&Cfg]) -> HashSet<String> {
    let mut out = HashSet::new();
    for cfg in cfgs {
        for blk in &cfg.blocks {
            for ins in &blk.instrs {
                if let Op::Import(p) = &ins.op {
                    out.insert(p.split('.').next().unwrap_or(p).to_string());
                }
            }
        }
    }
    out
}

/// Scope chain for name lookup: the scope itself, then enclosing function
/// and module scopes (class bodies are not visible from nested scopes).
fn lookup_chain<'a>(cfgs: &'a [&'a Cfg], start: &'a Cfg) -> impl Iterator<Item = &'a Cfg> + 'a {
    std::iter::successors(Some(start), move |c| c.parent.map(|p| cfgs[p]))
        .enumerate()
        .filter(|(i, c)| *i == 0 || c.kind != ScopeKind::Class)
        .map(|(_, c)| c)
}

/// Scope whose local `name` a read in `scope` refers to.
pub fn binding_scope(cfgs: &[&Cfg], scope: ScopeId, name: &str) -> ScopeId {
    for c in lookup_chain(cfgs, cfgs[scope]) {
        if c.vars.iter().any(|v| v.name == name && matches!(v.kind, VarKind::Local | VarKind::Comprehension)) {
            return c.id;
        }
    }
    0
}

fn resolve(
    cfgs: &[&Cfg],
    makes: &[HashMap<String, Vec<(bool, ScopeId)>>],
    methods: &BTreeMap<&str, Vec<ScopeId>>,
    imported_roots: &HashSet<String>,
    cfg: &Cfg,
    ci: &CallInfo,
) -> Vec<Binding> {
    let Some(path) = ci.path.as_deref() else { return Vec::new() };
    if !ci.has_receiver {
        if path.contains('.') || path.contains('(') {
            return Vec::new();
        }
        for c in lookup_chain(cfgs, cfg) {
            let local = c.vars.iter().any(|v| v.name == path && v.kind == VarKind::Local);
            if let Some(defs) = makes[c.id].get(path) {
                return defs
                    .iter()
                    .filter_map(|&(is_class, target)| {
                        if is_class {
                            let init = cfgs.iter().find(|m| m.parent == Some(target) && m.kind == ScopeKind::Method && m.name == "__init__")?;
                            Some(Binding { callee: init.id, params: bind_args(init, ci, 1, false), returns: false })
                        } else {
                            Some(Binding { callee: target, params: bind_args(cfgs[target], ci, 0, false), returns: true })
                        }
                    })
                    .collect();
            }
            if local {
                return Vec::new();
            }
        }
        return Vec::new();
    }
    let root = path.split('.').next().unwrap_or(path);
    if imported_roots.contains(root) || path.ends_with("()") {
        return Vec::new();
    }
    let Some(m) = ci.last_segment() else { return Vec::new() };
    methods
        .get(m)
        .map(|ids| {
            ids.iter()
                .map(|&id| {
                    let callee = cfgs[id];
                    let stat = has_decorator(callee, "staticmethod");
                    let offset = usize::from(!stat);
                    Binding { callee: id, params: bind_args(callee, ci, offset, !stat), returns: true }
                })
                .collect()
        })
        .unwrap_or_default()
}

/// Maps call operands to callee parameters. `offset` positional parameters
/// are consumed implicitly (the receiver); `bind_receiver` binds operand 0
/// to parameter 0.
fn bind_args(callee: &Cfg, ci: &CallInfo, offset: usize, bind_receiver: bool) -> Vec<Vec<usize>> {
    let params = &callee.params;
    let varargs = params.iter().position(|p| p.kind == ParamKind::VarArgs);
    let kwargs = params.iter().position(|p| p.kind == ParamKind::KwArgs);
    let positional: Vec<usize> =
        params.iter().enumerate().take_while(|(_, p)| p.kind == ParamKind::Normal).map(|(i, _)| i).collect();
    let normal: Vec<usize> = params.iter().enumerate().filter(|(_, p)| p.kind == ParamKind::Normal).map(|(i, _)| i).collect();
    let mut out = Vec::new();
    if ci.has_receiver {
        out.push(if bind_receiver && !params.is_empty() { vec![0] } else { Vec::new() });
    }
    for k in 0..ci.positional {
        let slot = offset + k;
        let mut bound: Vec<usize> = if ci.starred.contains(&k) {
            positional.iter().copied().filter(|&p| p >= slot).collect()
        } else {
            positional.get(slot).copied().into_iter().collect()
        };
        if bound.is_empty() || ci.starred.contains(&k) {
            bound.extend(varargs);
        }
        out.push(bound);
    }
    for kw in &ci.keywords {
        let bound: Vec<usize> = match kw {
            Some(name) => match params.iter().position(|p| p.kind == ParamKind::Normal && &p.name == name) {
                Some(i) => vec![i],
                None => kwargs.into_iter().collect(),
            },
            None => normal.iter().copied().chain(kwargs).collect(),
        };
        out.push(bound);
    }
    out
}

/// Which analysis a taint map came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Mode {
    Final,
    Intrinsic,
}

struct Ctx<'a> {
    params: Vec<bool>,
    free: &'a dyn Fn(&str) -> bool,
    effects: HashMap<(BlockId, usize), CallEffect>,
}

impl TaintContext for Ctx<'_> {
    fn param_tainted(&self, index: usize) -> bool {
        self.params.get(index).copied().unwrap_or(false)
    }

    fn free_tainted(&self, name: &str) -> bool {
        (self.free)(name)
    }

    fn call_effect(&self, block: BlockId, index: usize) -> Option<CallEffect> {
        self.effects.get(&(block, index)).cloned()
    }
}

/// Result of analyzing a whole file with one rule pack.
#[derive(Debug, Clone)]
pub struct ProgramTaint {
    /// Final taint per scope.
    pub maps: Vec<TaintMap>,
    pub summaries: Vec<Option<FunctionSummary>>,
    pub findings: Vec<Finding>,
    /// Rounds of the global fixpoint.
    pub rounds: usize,
    /// Per scope: parameters tainted by callers or as entry points.
    pub param_taint: Vec<Vec<bool>>,
}

struct Analysis<'a> {
    ssa: &'a [SsaProgram],
    cfgs: Vec<&'a Cfg>,
    rules: &'a CompiledPack,
    graph: CallGraph,
    free: BTreeSet<(ScopeId, String)>,
    summaries: Vec<Option<FunctionSummary>>,
    intrinsic_maps: Vec<Option<TaintMap>>,
    maps: Vec<Option<TaintMap>>,
    param_taint: Vec<Vec<bool>>,
}

/// Runs the global fixpoint and reports every flow in the file.
pub fn analyze_program(analyzed: &Analyzed, rules: &CompiledPack) -> ProgramTaint {
    analyze_scopes(&analyzed.ssa, rules)
}

pub fn analyze_scopes(ssa: &[SsaProgram], rules: &CompiledPack) -> ProgramTaint {
    let cfgs: Vec<&Cfg> = ssa.iter().map(|s| &s.cfg).collect();
    let graph = CallGraph::build(ssa);
    let mut called = vec![false; cfgs.len()];
    for (_, _, _, b) in graph.all_sites() {
        called[b.callee] = true;
    }
    let entry = rules.pack.has_entry_param_source();
    let param_taint = cfgs
        .iter()
        .map(|c| {
            (0..c.params.len())
                .map(|i| entry && c.is_function_like() && !called[c.id] && !is_receiver_param(c, i))
                .collect()
        })
        .collect();
    let n = cfgs.len();
    let mut a = Analysis {
        ssa,
        cfgs,
        rules,
        graph,
        free: BTreeSet::new(),
        summaries: vec![None; n],
        intrinsic_maps: vec![None; n],
        maps: vec![None; n],
        param_taint,
    };
    let mut rounds = 0;
    loop {
        rounds += 1;
        a.compute_summaries();
        for s in 0..n {
            let map = a.run(s, a.param_taint[s].clone(), true, Mode::Final);
            a.maps[s] = Some(map);
        }
        if !a.update_inputs() {
            break;
        }
    }
    let findings = a.collect_findings();
    ProgramTaint {
        maps: a.maps.into_iter().map(|m| m.expect("analyzed")).collect(),
        summaries: a.summaries,
        findings,
        rounds,
        param_taint: a.param_taint,
    }
}

impl Analysis<'_> {
    fn effects(&self, scope: ScopeId, intrinsic: bool) -> HashMap<(BlockId, usize), CallEffect> {
        let mut out = HashMap::new();
        for (b, instrs) in self.graph.sites[scope].iter().enumerate() {
            for (i, bindings) in instrs.iter().enumerate() {
                let returning: Vec<&Binding> = bindings.iter().filter(|b| b.returns).collect();
                if returning.is_empty() {
                    continue;
                }
                let mut effect = CallEffect::default();
                for bd in returning {
                    // Callees without a summary yet (same recursive cycle)
                    // are treated as passing every argument through.
                    let sum = self.summaries[bd.callee].as_ref();
                    effect.intrinsic |= intrinsic && sum.is_some_and(|s| s.intrinsic_return);
                    for (k, params) in bd.params.iter().enumerate() {
                        let flows = params.iter().any(|&p| sum.is_none_or(|s| s.param_to_return.get(p).copied().unwrap_or(true)));
                        if flows && !effect.flowing.contains(&k) {
                            effect.flowing.push(k);
                        }
                    }
                }
                effect.flowing.sort_unstable();
                out.insert((b, i), effect);
            }
        }
        out
    }

    fn free_lookup(&self, scope: ScopeId) -> impl Fn(&str) -> bool + '_ {
        move |name: &str| {
            let b = binding_scope(&self.cfgs, scope, name);
            b != scope && self.free.contains(&(b, name.to_string()))
        }
    }

    fn run(&self, scope: ScopeId, params: Vec<bool>, with_free: bool, mode: Mode) -> TaintMap {
        let free = self.free_lookup(scope);
        let none = |_: &str| false;
        let ctx = Ctx {
            params,
            free: if with_free { &free } else { &none },
            effects: self.effects(scope, with_free || mode == Mode::Final),
        };
        propagate_with(&self.ssa[scope], self.rules, &ctx)
    }

    fn returns_taint(&self, scope: ScopeId, map: &TaintMap) -> bool {
        returned_value(&self.ssa[scope], map).is_some()
    }

    fn compute_summaries(&mut self) {
        let order = self.function_sccs();
        self.summaries = vec![None; self.cfgs.len()];
        for scc in order {
            let recursive = scc.len() > 1 || self.calls(scc[0], scc[0]);
            if recursive {
                for &f in &scc {
                    let np = self.cfgs[f].params.len();
                    self.summaries[f] = Some(FunctionSummary {
                        param_to_return: vec![true; np],
                        param_to_sink: vec![false; np],
                        recursive: true,
                        ..FunctionSummary::default()
                    });
                }
                // Intrinsic returns and sink reachability grow monotonically
                // across the cycle; iterate until stable.
                loop {
                    let mut changed = false;
                    for &f in &scc {
                        let next = self.summarize(f, true);
                        if self.summaries[f].as_ref() != Some(&next) {
                            self.summaries[f] = Some(next);
                            changed = true;
                        }
                    }
                    if !changed {
                        break;
                    }
                }
            } else {
                let f = scc[0];
                let s = self.summarize(f, false);
                self.summaries[f] = Some(s);
            }
        }
    }

    fn summarize(&mut self, f: ScopeId, recursive: bool) -> FunctionSummary {
        let np = self.cfgs[f].params.len();
        let prev = self.summaries[f].clone().unwrap_or_default();
        let mut sum = FunctionSummary {
            param_to_return: vec![recursive; np],
            param_to_sink: vec![false; np],
            recursive,
            ..FunctionSummary::default()
        };
        for i in 0..np {
            let params = (0..np).map(|j| j == i).collect();
            let map = self.run(f, params, false, Mode::Intrinsic);
            if !recursive {
                sum.param_to_return[i] = self.returns_taint(f, &map);
            }
            sum.param_to_sink[i] = prev.param_to_sink.get(i).copied().unwrap_or(false)
                || !sink_hits(&self.ssa[f], self.rules, &map).is_empty();
        }
        let map = self.run(f, vec![false; np], true, Mode::Intrinsic);
        sum.intrinsic_return = prev.intrinsic_return || self.returns_taint(f, &map);
        sum.internal_flow = prev.internal_flow || !sink_hits(&self.ssa[f], self.rules, &map).is_empty();
        self.intrinsic_maps[f] = Some(map);
        sum
    }

    fn calls(&self, from: ScopeId, to: ScopeId) -> bool {
        self.graph.sites[from].iter().flatten().flatten().any(|b| b.callee == to && b.returns)
    }

    /// Function scopes in callee-first order, grouped into strongly
    /// connected components (Tarjan).
    fn function_sccs(&self) -> Vec<Vec<ScopeId>> {
        let n = self.cfgs.len();
        let funcs: Vec<ScopeId> = (0..n).filter(|&s| self.cfgs[s].is_function_like()).collect();
        let mut succ: Vec<Vec<ScopeId>> = vec![Vec::new(); n];
        for &f in &funcs {
            for b in self.graph.sites[f].iter().flatten().flatten() {
                if b.returns && !succ[f].contains(&b.callee) {
                    succ[f].push(b.callee);
                }
            }
        }
        let mut index = vec![usize::MAX; n];
        let mut low = vec![0; n];
        let mut on_stack = vec![false; n];
        let mut stack = Vec::new();
        let mut counter = 0;
        let mut out = Vec::new();
        for &root in &funcs {
            if index[root] != usize::MAX {
                continue;
            }
            let mut work: Vec<(ScopeId, usize)> = vec![(root, 0)];
            index[root] = counter;
            low[root] = counter;
            counter += 1;
            stack.push(root);
            on_stack[root] = true;
            while let Some(&mut (v, ref mut i)) = work.last_mut() {
                if *i < succ[v].len() {
                    let w = succ[v][*i];
                    *i += 1;
                    if index[w] == usize::MAX {
                        index[w] = counter;
                        low[w] = counter;
                        counter += 1;
                        stack.push(w);
                        on_stack[w] = true;
                        work.push((w, 0));
                    } else if on_stack[w] {
                        low[v] = low[v].min(index[w]);
                    }
                } else {
                    work.pop();
                    if let Some(&(p, _)) = work.last() {
                        low[p] = low[p].min(low[v]);
                    }
                    if low[v] == index[v] {
                        let mut comp = Vec::new();
                        while let Some(w) = stack.pop() {
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        comp.sort_unstable();
                        out.push(comp);
                    }
                }
            }
        }
        out
    }

    /// Propagates taint into callee parameters, free variables and method
    /// receivers. Returns whether anything changed.
    fn update_inputs(&mut self) -> bool {
        let mut changed = false;
        let sites: Vec<(ScopeId, BlockId, usize, Binding)> =
            self.graph.all_sites().map(|(s, b, i, bd)| (s, b, i, bd.clone())).collect();
        for (s, b, i, bd) in sites {
            if self.cfgs[s].blocks[b].unreachable {
                continue;
            }
            let map = self.maps[s].as_ref().expect("analyzed");
            for (k, params) in bd.params.iter().enumerate() {
                let Some(u) = self.ssa[s].uses[b][i].get(k).copied().flatten() else { continue };
                if !map.is_tainted(u) {
                    continue;
                }
                for &p in params {
                    if !self.param_taint[bd.callee][p] {
                        self.param_taint[bd.callee][p] = true;
                        changed = true;
                    }
                }
            }
        }
        for s in 0..self.cfgs.len() {
            let ssa = &self.ssa[s];
            let map = self.maps[s].as_ref().expect("analyzed");
            for v in map.tainted_values() {
                let var = ssa.var_of(v);
                let info = &ssa.cfg.vars[var];
                if info.kind == VarKind::Temp {
                    continue;
                }
                let target = if info.kind == VarKind::Free { binding_scope(&self.cfgs, s, &info.name) } else { s };
                if self.free.insert((target, info.name.clone())) {
                    changed = true;
                }
            }
        }
        // Receiver taint is shared by every method of the class.
        for s in 0..self.cfgs.len() {
            let cfg = self.cfgs[s];
            if !is_receiver_param(cfg, 0) {
                continue;
            }
            let recv = cfg.params[0].var;
            let map = self.maps[s].as_ref().expect("analyzed");
            if !map.tainted_values().any(|v| self.ssa[s].var_of(v) == recv) {
                continue;
            }
            for m in 0..self.cfgs.len() {
                let other = self.cfgs[m];
                if other.parent == cfg.parent && is_receiver_param(other, 0) && !self.param_taint[m][0] {
                    self.param_taint[m][0] = true;
                    changed = true;
                }
            }
        }
        changed
    }

    fn map(&self, scope: ScopeId, mode: Mode) -> &TaintMap {
        match mode {
            Mode::Final => self.maps[scope].as_ref().expect("analyzed"),
            Mode::Intrinsic => self.intrinsic_maps[scope].as_ref().expect("summarized"),
        }
    }

    fn collect_findings(&self) -> Vec<Finding> {
        let mut out = Vec::new();
        for s in 0..self.cfgs.len() {
            let ssa = &self.ssa[s];
            let map = self.map(s, Mode::Final);
            for hit in sink_hits(ssa, self.rules, map) {
                let mut visited = HashSet::new();
                let mut hops = self
                    .path_to(s, hit.value, Mode::Final, &mut visited)
                    .unwrap_or_else(|| local_hops(s, ssa, map, hit.value));
                hops.push(instr_hop(s, ssa, hit.block, hit.index));
                out.push(make_finding(self.rules, &hit, hops));
            }
        }
        sort_findings(&mut out);
        out
    }

    /// Hops from a root source to the definition of `v`.
    fn path_to(&self, scope: ScopeId, v: ValueId, mode: Mode, visited: &mut HashSet<(ScopeId, ValueId, Mode)>) -> Option<Vec<Hop>> {
        if !visited.insert((scope, v, mode)) {
            return None;
        }
        let ssa = &self.ssa[scope];
        let map = self.map(scope, mode);
        if !map.is_tainted(v) {
            return None;
        }
        let (chain, root) = origin_chain(ssa, map, v);
        let local: Vec<Hop> = chain.iter().map(|&u| value_hop(scope, ssa, u)).collect();
        let prefix = match root {
            Root::Source => Some(Vec::new()),
            Root::Param(i) => self.param_prefix(scope, i, mode, visited),
            Root::Free => {
                let name = ssa.cfg.var_name(ssa.var_of(chain[0]));
                let b = binding_scope(&self.cfgs, scope, name);
                let bmap = self.map(b, Mode::Final);
                let bssa = &self.ssa[b];
                let candidates: Vec<ValueId> = bmap
                    .tainted_values()
                    .filter(|&u| bssa.cfg.var_name(bssa.var_of(u)) == name)
                    .filter(|&u| !matches!(bssa.def_instr(u).map(|i| &i.op), Some(Op::Entry(_))))
                    .collect();
                candidates.into_iter().find_map(|u| self.path_to(b, u, Mode::Final, visited))
            }
            Root::Callee { block, index } => {
                let callees: Vec<ScopeId> = self.graph.bindings(scope, block, index).iter().filter(|b| b.returns).map(|b| b.callee).collect();
                callees.into_iter().find_map(|c| {
                    let cmap = self.intrinsic_maps[c].as_ref()?;
                    let (rb, ri, u) = returned_value(&self.ssa[c], cmap)?;
                    let mut p = self.path_to(c, u, Mode::Intrinsic, visited)?;
                    p.push(instr_hop(c, &self.ssa[c], rb, ri));
                    Some(p)
                })
            }
        };
        let mut hops = match prefix {
            Some(p) => p,
            // Entry parameters are sources in their own right.
            None if matches!(root, Root::Param(i) if self.is_entry_param(scope, i)) => Vec::new(),
            None => return None,
        };
        hops.extend(local);
        Some(hops)
    }

    fn is_entry_param(&self, scope: ScopeId, i: usize) -> bool {
        let cfg = self.cfgs[scope];
        self.rules.pack.has_entry_param_source()
            && cfg.is_function_like()
            && !is_receiver_param(cfg, i)
            && !self.graph.all_sites().any(|(_, _, _, b)| b.callee == scope)
    }

    fn param_prefix(&self, scope: ScopeId, i: usize, mode: Mode, visited: &mut HashSet<(ScopeId, ValueId, Mode)>) -> Option<Vec<Hop>> {
        if mode == Mode::Intrinsic {
            return None;
        }
        let sites: Vec<(ScopeId, BlockId, usize, usize)> = self
            .graph
            .all_sites()
            .filter(|(_, _, _, b)| b.callee == scope)
            .flat_map(|(s, b, idx, bd)| {
                bd.params.iter().enumerate().filter(|(_, ps)| ps.contains(&i)).map(move |(k, _)| (s, b, idx, k))
            })
            .collect();
        for (s, b, idx, k) in sites {
            if self.cfgs[s].blocks[b].unreachable {
                continue;
            }
            let Some(u) = self.ssa[s].uses[b][idx].get(k).copied().flatten() else { continue };
            if let Some(p) = self.path_to(s, u, Mode::Final, visited) {
                return Some(p);
            }
        }
        // Receiver taint shared across methods of a class.
        if i == 0 && is_receiver_param(self.cfgs[scope], 0) {
            let parent = self.cfgs[scope].parent;
            for m in 0..self.cfgs.len() {
                let other = self.cfgs[m];
                if m == scope || other.parent != parent || !is_receiver_param(other, 0) {
                    continue;
                }
                let recv = other.params[0].var;
                let omap = self.map(m, Mode::Final);
                let vals: Vec<ValueId> = omap
                    .tainted_values()
                    .filter(|&u| self.ssa[m].var_of(u) == recv && !matches!(self.ssa[m].def_instr(u).map(|x| &x.op), Some(Op::Param(_))))
                    .collect();
                if let Some(p) = vals.into_iter().find_map(|u| self.path_to(m, u, Mode::Final, visited)) {
                    return Some(p);
                }
            }
        }
        None
    }

    /// Checks that consecutive hops are linked by a def-use edge, a φ
    /// operand, a parameter binding, a return, a free-variable read or a
    /// shared method receiver.
    fn validate(&self, hops: &[Hop]) -> Result<(), String> {
        for w in hops.windows(2) {
            let (a, b) = (&w[0].anchor, &w[1].anchor);
            if !self.linked(a, b) {
                return Err(format!("hops {}:{} and {}:{} are not connected", w[0].line, w[0].col, w[1].line, w[1].col));
            }
        }
        Ok(())
    }

    fn defined(&self, a: &HopAnchor) -> Option<ValueId> {
        let ssa = &self.ssa[a.scope];
        match a.index {
            Some(i) => ssa.defs[a.block][i],
            None => Some(ssa.phis[a.block][a.phi].dest),
        }
    }

    fn linked(&self, a: &HopAnchor, b: &HopAnchor) -> bool {
        let sb = &self.ssa[b.scope];
        let def_a = self.defined(a);
        let b_instr = b.index.map(|i| &sb.cfg.blocks[b.block].instrs[i]);
        if a.scope == b.scope {
            let Some(u) = def_a else { return false };
            return match b.index {
                Some(i) => sb.uses[b.block][i].contains(&Some(u)),
                None => sb.phis[b.block][b.phi].incoming.iter().any(|(_, x)| *x == u),
            };
        }
        let sa = &self.ssa[a.scope];
        match (b_instr.map(|x| &x.op), def_a) {
            (Some(Op::Param(p)), Some(u)) => {
                let p = *p;
                let via_call = self.graph.all_sites().any(|(s, blk, i, bd)| {
                    s == a.scope
                        && bd.callee == b.scope
                        && bd.params.iter().enumerate().any(|(k, ps)| ps.contains(&p) && sa.uses[blk][i].get(k) == Some(&Some(u)))
                });
                let via_receiver = p == 0
                    && self.cfgs[a.scope].parent == self.cfgs[b.scope].parent
                    && is_receiver_param(self.cfgs[a.scope], 0)
                    && sa.var_of(u) == self.cfgs[a.scope].params[0].var;
                via_call || via_receiver
            }
            (Some(Op::Entry(EntryKind::Free)), Some(u)) => {
                let name = sb.cfg.var_name(sb.cfg.blocks[b.block].instrs[b.index.unwrap_or(0)].dest.unwrap_or(0));
                sa.cfg.var_name(sa.var_of(u)) == name && binding_scope(&self.cfgs, b.scope, name) == a.scope
            }
            (Some(Op::Call(_)), None) => {
                let ret = a.index.map(|i| &sa.cfg.blocks[a.block].instrs[i].op);
                matches!(ret, Some(Op::Return))
                    && self.graph.bindings(b.scope, b.block, b.index.unwrap_or(0)).iter().any(|bd| bd.callee == a.scope)
            }
            _ => false,
        }
    }
}

/// A tainted returned value: (block, index of the return, value).
fn returned_value(ssa: &SsaProgram, map: &TaintMap) -> Option<(BlockId, usize, ValueId)> {
    for (b, blk) in ssa.cfg.blocks.iter().enumerate() {
        if blk.unreachable {
            continue;
        }
        for (i, ins) in blk.instrs.iter().enumerate() {
            if ins.op == Op::Return {
                if let Some(u) = ssa.uses[b][i].first().copied().flatten() {
                    if map.is_tainted(u) {
                        return Some((b, i, u));
                    }
                }
            }
        }
    }
    None
}

fn local_hops(scope: ScopeId, ssa: &SsaProgram, map: &TaintMap, v: ValueId) -> Vec<Hop> {
    let (chain, _) = origin_chain(ssa, map, v);
    chain.iter().map(|&u| value_hop(scope, ssa, u)).collect()
}

/// Summary of one function analyzed without the rest of its file. A call
/// to the function's own name makes it recursive (conservative summary).
pub fn summarize_function(fn_ssa: &SsaProgram, rules: &CompiledPack) -> FunctionSummary {
    let cfg = &fn_ssa.cfg;
    let np = cfg.params.len();
    let recursive = cfg.blocks.iter().flat_map(|b| &b.instrs).any(|ins| match &ins.op {
        Op::Call(ci) => !ci.has_receiver && ci.path.as_deref() == Some(cfg.name.as_str()),
        _ => false,
    });
    let none = |_: &str| false;
    let mut sum = FunctionSummary {
        param_to_return: vec![recursive; np],
        param_to_sink: vec![false; np],
        recursive,
        ..FunctionSummary::default()
    };
    for i in 0..np {
        let ctx = Ctx { params: (0..np).map(|j| j == i).collect(), free: &none, effects: HashMap::new() };
        let map = propagate_with(fn_ssa, rules, &ctx);
        if !recursive {
            sum.param_to_return[i] = returned_value(fn_ssa, &map).is_some();
        }
        sum.param_to_sink[i] = !sink_hits(fn_ssa, rules, &map).is_empty();
    }
    let ctx = Ctx { params: vec![false; np], free: &none, effects: HashMap::new() };
    let map = propagate_with(fn_ssa, rules, &ctx);
    sum.intrinsic_return = returned_value(fn_ssa, &map).is_some();
    sum.internal_flow = !sink_hits(fn_ssa, rules, &map).is_empty();
    sum
}

impl ProgramTaint {
    /// Structural check of every finding's flow path.
    pub fn validate_paths(&self, ssa: &[SsaProgram], rules: &CompiledPack) -> Result<(), String> {
        let cfgs: Vec<&Cfg> = ssa.iter().map(|s| &s.cfg).collect();
        let a = Analysis {
            ssa,
            cfgs,
            rules,
            graph: CallGraph::build(ssa),
            free: BTreeSet::new(),
            summaries: Vec::new(),
            intrinsic_maps: Vec::new(),
            maps: Vec::new(),
            param_taint: Vec::new(),
        };
        for f in &self.findings {
            a.validate(&f.evidence.hops())?;
        }
        Ok(())
    }
}

/// Whether a value is defined by a parameter binding.
pub fn is_param_value(ssa: &SsaProgram, v: ValueId) -> bool {
    matches!(ssa.values[v.index()].def, DefSite::Instr { .. }) && matches!(ssa.def_instr(v).map(|i| &i.op), Some(Op::Param(_)))
}
