//! AST to CFG lowering.

use super::ast::*;
use super::ir::*;
use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

/// All scopes of one source file. `scopes[0]` is the module top level.
#[derive(Debug, Clone)]
pub struct Program {
    pub scopes: Vec<Cfg>,
    /// Import bindings anywhere in the file: local name -> dotted module path.
    pub imports: BTreeMap<String, String>,
}

impl Program {
    pub fn module(&self) -> &Cfg {
        &self.scopes[0]
    }

    pub fn by_qualname(&self, qualname: &str) -> Option<&Cfg> {
        self.scopes.iter().find(|c| c.qualname == qualname)
    }

    pub fn functions(&self) -> impl Iterator<Item = &Cfg> {
        self.scopes.iter().filter(|c| c.is_function_like())
    }
}

/// Lowers a parsed module into one CFG per scope.
pub fn build_cfg(module: &Module) -> Program {
    let mut imports = BTreeMap::new();
    walk_stmts(&module.body, &mut |s| match &s.kind {
        StmtKind::Import(aliases) => {
            for a in aliases {
                let path = match &a.asname {
                    Some(_) => a.name.clone(),
                    None => a.bound_name().to_string(),
                };
                imports.insert(a.bound_name().to_string(), path);
            }
        }
        StmtKind::ImportFrom { module, names, .. } => {
            for a in names.iter().filter(|a| a.name != "*") {
                let path = match module {
                    Some(m) => format!("{m}.{}", a.name),
                    None => a.name.clone(),
                };
                imports.insert(a.bound_name().to_string(), path);
            }
        }
        _ => {}
    });
    let mut pb = ProgramBuilder { scopes: vec![None], imports, lines: module.lines.clone() };
    let header = ScopeHeader {
        id: 0,
        name: "<module>".into(),
        qualname: "<module>".into(),
        kind: ScopeKind::Module,
        parent: None,
        span: Span::new(1, 1),
        params: Vec::new(),
        returns: None,
        decorators: Vec::new(),
        is_async: false,
    };
    let cfg = FnBuilder::lower(&mut pb, header, &module.body);
    pb.scopes[0] = Some(cfg);
    Program {
        scopes: pb.scopes.into_iter().map(|c| c.expect("scope lowered")).collect(),
        imports: pb.imports,
    }
}

struct ProgramBuilder {
    scopes: Vec<Option<Cfg>>,
    imports: BTreeMap<String, String>,
    lines: std::sync::Arc<Vec<String>>,
}

struct ScopeHeader {
    id: ScopeId,
    name: String,
    qualname: String,
    kind: ScopeKind,
    parent: Option<ScopeId>,
    span: Span,
    params: Vec<Param>,
    returns: Option<Expr>,
    decorators: Vec<Expr>,
    is_async: bool,
}

enum Dest {
    Temp,
    Var(VarId),
    Discard,
}

#[derive(Clone, Copy)]
enum ExcCtx {
    Handler(BlockId),
    Finally(usize),
}

struct LoopCtx {
    header: BlockId,
    exit: BlockId,
    exc_depth: usize,
}

struct FinallyCtx {
    block: BlockId,
    exc: bool,
    ret: bool,
    jumps: Vec<(usize, bool)>,
}

struct FnBuilder<'p> {
    pb: &'p mut ProgramBuilder,
    cfg: Cfg,
    cur: BlockId,
    var_map: HashMap<String, VarId>,
    locals: BTreeSet<String>,
    comp_scopes: Vec<HashMap<String, VarId>>,
    comp_counter: usize,
    temp_counter: usize,
    loops: Vec<LoopCtx>,
    exc: Vec<ExcCtx>,
    finallys: Vec<FinallyCtx>,
}

impl<'p> FnBuilder<'p> {
    fn lower(pb: &'p mut ProgramBuilder, h: ScopeHeader, body: &[Stmt]) -> Cfg {
        let (mut locals, declared) = bound_names(body);
        for p in &h.params {
            locals.insert(p.name.clone());
        }
        for d in &declared {
            locals.remove(d);
        }
        let cfg = Cfg {
            id: h.id,
            name: h.name,
            qualname: h.qualname,
            kind: h.kind,
            parent: h.parent,
            span: h.span,
            params: Vec::new(),
            returns: h.returns,
            decorators: h.decorators,
            is_async: h.is_async,
            vars: Vec::new(),
            blocks: Vec::new(),
            edges: Vec::new(),
            entry: 0,
            exit: 1,
            body_end: 0,
            declarations: Vec::new(),
            lines: pb.lines.clone(),
        };
        let mut b = FnBuilder {
            pb,
            cfg,
            cur: 0,
            var_map: HashMap::new(),
            locals,
            comp_scopes: Vec::new(),
            comp_counter: 0,
            temp_counter: 0,
            loops: Vec::new(),
            exc: Vec::new(),
            finallys: Vec::new(),
        };
        let entry = b.new_block();
        let exit = b.new_block();
        debug_assert_eq!((entry, exit), (0, 1));
        for (i, p) in h.params.iter().enumerate() {
            let v = b.var(&p.name);
            b.cfg.params.push(ParamInfo {
                name: p.name.clone(),
                var: v,
                annotation: p.annotation.clone(),
                has_default: p.default.is_some(),
                kind: p.kind,
                span: p.span,
            });
            b.emit_raw(Some(v), Op::Param(i), Vec::new(), p.span, false);
        }
        let first = b.new_block();
        b.edge(entry, first, EdgeLabel::Fallthrough);
        b.cur = first;
        b.body(body);
        b.edge(b.cur, exit, EdgeLabel::Fallthrough);
        b.cfg.body_end = b.cur;
        b.finish()
    }

    fn finish(mut self) -> Cfg {
        let cfg = &mut self.cfg;
        let mut seen_edges = BTreeSet::new();
        cfg.edges.retain(|e| seen_edges.insert((e.from, e.to, e.label as u8)));

        let n = cfg.blocks.len();
        let mut has_pred = vec![false; n];
        for e in &cfg.edges {
            has_pred[e.to] = true;
        }
        let mut roots: Vec<BlockId> = Vec::new();
        loop {
            let seen = bfs(n, &cfg.edges, std::iter::once(cfg.entry).chain(roots.iter().copied()));
            let pick = (0..n)
                .find(|&b| !seen[b] && b != cfg.exit && !has_pred[b])
                .or_else(|| (0..n).find(|&b| !seen[b] && b != cfg.exit && b != cfg.entry));
            match pick {
                Some(b) => roots.push(b),
                None => break,
            }
        }

        let all_vars: Vec<VarId> = (0..cfg.vars.len()).collect();
        let params: BTreeSet<VarId> = cfg.params.iter().map(|p| p.var).collect();
        let entry_span = cfg.span;
        let mut entry_defs = Vec::new();
        for &v in &all_vars {
            if params.contains(&v) {
                continue;
            }
            let kind = if cfg.vars[v].kind == VarKind::Free { EntryKind::Free } else { EntryKind::Undefined };
            entry_defs.push(Instr { dest: Some(v), op: Op::Entry(kind), args: Vec::new(), span: entry_span, synthetic: true });
        }
        cfg.blocks[cfg.entry].instrs.extend(entry_defs);
        for &r in &roots {
            let span = cfg.blocks[r].instrs.iter().find(|i| !i.synthetic).map(|i| i.span).unwrap_or(entry_span);
            let defs: Vec<Instr> = all_vars
                .iter()
                .map(|&v| Instr { dest: Some(v), op: Op::Entry(EntryKind::Undefined), args: Vec::new(), span, synthetic: true })
                .collect();
            cfg.blocks[r].instrs.splice(0..0, defs);
            cfg.blocks[r].region_root = true;
        }
        let reach = cfg.reachable_from_entry();
        for (b, blk) in cfg.blocks.iter_mut().enumerate() {
            blk.unreachable = !reach[b];
        }
        self.cfg
    }

    // ----- plumbing -----

    fn new_block(&mut self) -> BlockId {
        self.cfg.blocks.push(Block::default());
        self.cfg.blocks.len() - 1
    }

    fn edge(&mut self, from: BlockId, to: BlockId, label: EdgeLabel) {
        self.cfg.edges.push(Edge { from, to, label });
    }

    fn dead_block(&mut self) {
        self.cur = self.new_block();
    }

    fn emit_raw(&mut self, dest: Option<VarId>, op: Op, args: Vec<Operand>, span: Span, synthetic: bool) {
        let b = if matches!(op, Op::Param(_)) { self.cfg.entry } else { self.cur };
        self.cfg.blocks[b].instrs.push(Instr { dest, op, args, span, synthetic });
    }

    fn emit(&mut self, dest: Option<VarId>, op: Op, args: Vec<Operand>, span: Span) {
        self.emit_raw(dest, op, args, span, false);
    }

    fn new_var(&mut self, name: String, kind: VarKind) -> VarId {
        self.cfg.vars.push(VarInfo { name, kind });
        self.cfg.vars.len() - 1
    }

    fn temp(&mut self) -> VarId {
        self.temp_counter += 1;
        self.new_var(format!("$t{}", self.temp_counter), VarKind::Temp)
    }

    fn var(&mut self, name: &str) -> VarId {
        for scope in self.comp_scopes.iter().rev() {
            if let Some(&v) = scope.get(name) {
                return v;
            }
        }
        if let Some(&v) = self.var_map.get(name) {
            return v;
        }
        let kind = if self.locals.contains(name) { VarKind::Local } else { VarKind::Free };
        let v = self.new_var(name.to_string(), kind);
        self.var_map.insert(name.to_string(), v);
        v
    }

    fn reachable_now(&self, target: BlockId) -> bool {
        bfs(self.cfg.blocks.len(), &self.cfg.edges, std::iter::once(self.cfg.entry))[target]
    }

    fn has_preds(&self, b: BlockId) -> bool {
        self.cfg.edges.iter().any(|e| e.to == b)
    }

    // ----- control transfer routing -----

    fn route_exception(&mut self, from: BlockId) {
        match self.exc.last().copied() {
            Some(ExcCtx::Handler(d)) => self.edge(from, d, EdgeLabel::Exception),
            Some(ExcCtx::Finally(i)) => {
                let f = self.finallys[i].block;
                self.finallys[i].exc = true;
                self.edge(from, f, EdgeLabel::Exception);
            }
            None => self.edge(from, self.cfg.exit, EdgeLabel::Exception),
        }
    }

    fn route_return(&mut self, from: BlockId) {
        let fin = self.exc.iter().rev().find_map(|c| match c {
            ExcCtx::Finally(i) => Some(*i),
            ExcCtx::Handler(_) => None,
        });
        match fin {
            Some(i) => {
                let f = self.finallys[i].block;
                self.finallys[i].ret = true;
                self.edge(from, f, EdgeLabel::Fallthrough);
            }
            None => self.edge(from, self.cfg.exit, EdgeLabel::Fallthrough),
        }
    }

    fn route_jump(&mut self, from: BlockId, loop_idx: usize, is_break: bool) {
        let depth = self.loops[loop_idx].exc_depth;
        let fin = self.exc[depth..].iter().rev().find_map(|c| match c {
            ExcCtx::Finally(i) => Some(*i),
            ExcCtx::Handler(_) => None,
        });
        match fin {
            Some(i) => {
                let f = self.finallys[i].block;
                self.finallys[i].jumps.push((loop_idx, is_break));
                self.edge(from, f, EdgeLabel::Fallthrough);
            }
            None => {
                let l = &self.loops[loop_idx];
                if is_break {
                    let exit = l.exit;
                    self.edge(from, exit, EdgeLabel::Fallthrough);
                } else {
                    let header = l.header;
                    self.edge(from, header, EdgeLabel::LoopBack);
                }
            }
        }
    }

    /// Inside a `try` body every statement boundary may raise into the handler.
    fn stmt_boundary(&mut self) {
        if let Some(ExcCtx::Handler(d)) = self.exc.last().copied() {
            self.edge(self.cur, d, EdgeLabel::Exception);
            let next = self.new_block();
            self.edge(self.cur, next, EdgeLabel::Fallthrough);
            self.cur = next;
        }
    }

    fn header_exc_edge(&mut self) {
        if let Some(ExcCtx::Handler(d)) = self.exc.last().copied() {
            self.edge(self.cur, d, EdgeLabel::Exception);
        }
    }

    // ----- statements -----

    fn body(&mut self, stmts: &[Stmt]) {
        for s in stmts {
            self.stmt(s);
        }
    }

    fn stmt(&mut self, s: &Stmt) {
        let span = s.span;
        match &s.kind {
            StmtKind::Expr(e) => {
                self.expr(e, Dest::Discard);
                self.stmt_boundary();
            }
            StmtKind::Assign { targets, value } => {
                if let [Expr { kind: ExprKind::Name(n), .. }] = targets.as_slice() {
                    let v = self.var(n);
                    self.expr(value, Dest::Var(v));
                } else {
                    let v = self.expr(value, Dest::Temp);
                    for t in targets {
                        self.bind_target(t, v.clone(), span);
                    }
                }
                self.stmt_boundary();
            }
            StmtKind::AugAssign { target, op, value } => {
                let rhs = self.expr(value, Dest::Temp);
                match &target.kind {
                    ExprKind::Name(n) => {
                        let v = self.var(n);
                        self.emit(Some(v), Op::BinOp(*op), vec![Operand::Var(v), rhs], span);
                    }
                    _ => {
                        let cur = self.expr(target, Dest::Temp);
                        let t = self.temp();
                        self.emit(Some(t), Op::BinOp(*op), vec![cur, rhs], span);
                        self.bind_target(target, Operand::Var(t), span);
                    }
                }
                self.stmt_boundary();
            }
            StmtKind::AnnAssign { target, annotation, value } => {
                match (&target.kind, value) {
                    (ExprKind::Name(n), value) => {
                        let v = self.var(n);
                        self.cfg.declarations.push(Declaration { var: v, annotation: annotation.clone(), span });
                        if let Some(value) = value {
                            self.expr(value, Dest::Var(v));
                        }
                    }
                    (_, Some(value)) => {
                        let v = self.expr(value, Dest::Temp);
                        self.bind_target(target, v, span);
                    }
                    (_, None) => {}
                }
                self.stmt_boundary();
            }
            StmtKind::If { test, body, orelse } => self.lower_if(test, body, orelse),
            StmtKind::While { test, body, orelse } => self.lower_while(test, body, orelse),
            StmtKind::For { target, iter, body, orelse, .. } => self.lower_for(target, iter, body, orelse, span),
            StmtKind::FunctionDef(f) => {
                let mut args = Vec::new();
                for d in &f.decorators {
                    args.push(self.expr(d, Dest::Temp));
                }
                for p in &f.params {
                    if let Some(d) = &p.default {
                        args.push(self.expr(d, Dest::Temp));
                    }
                }
                let kind = if self.cfg.kind == ScopeKind::Class { ScopeKind::Method } else { ScopeKind::Function };
                let id = self.child_scope(&f.name, kind, f.span, &f.params, f.returns.clone(), f.decorators.clone(), f.is_async, &f.body);
                let v = self.var(&f.name);
                self.emit(Some(v), Op::MakeFunction(id), args, span);
                self.stmt_boundary();
            }
            StmtKind::ClassDef(c) => {
                let mut args = Vec::new();
                for d in &c.decorators {
                    args.push(self.expr(d, Dest::Temp));
                }
                for b in &c.bases {
                    args.push(self.expr(b, Dest::Temp));
                }
                for k in &c.keywords {
                    args.push(self.expr(&k.value, Dest::Temp));
                }
                let id = self.child_scope(&c.name, ScopeKind::Class, c.span, &[], None, c.decorators.clone(), false, &c.body);
                let v = self.var(&c.name);
                self.emit(Some(v), Op::MakeClass(id), args, span);
                self.stmt_boundary();
            }
            StmtKind::Return(value) => {
                let args = match value {
                    Some(v) => vec![self.expr(v, Dest::Temp)],
                    None => Vec::new(),
                };
                self.emit(None, Op::Return, args, span);
                self.route_return(self.cur);
                self.dead_block();
            }
            StmtKind::Raise { exc, cause } => {
                let mut args = Vec::new();
                for e in [exc, cause].into_iter().flatten() {
                    args.push(self.expr(e, Dest::Temp));
                }
                self.emit(None, Op::Raise, args, span);
                self.route_exception(self.cur);
                self.dead_block();
            }
            StmtKind::Break | StmtKind::Continue => {
                let is_break = matches!(s.kind, StmtKind::Break);
                self.emit(None, Op::Nop, Vec::new(), span);
                if let Some(idx) = self.loops.len().checked_sub(1) {
                    self.route_jump(self.cur, idx, is_break);
                }
                self.dead_block();
            }
            StmtKind::Pass => {
                self.emit(None, Op::Nop, Vec::new(), span);
                self.stmt_boundary();
            }
            StmtKind::Try { body, handlers, orelse, finalbody } => self.lower_try(body, handlers, orelse, finalbody),
            StmtKind::With { items, body, .. } => {
                for it in items {
                    let ctx = self.expr(&it.context, Dest::Temp);
                    if let Some(t) = &it.target {
                        let v = self.temp();
                        self.emit(Some(v), Op::Bind(BindKind::WithAs), vec![ctx], it.context.span);
                        self.bind_target(t, Operand::Var(v), span);
                    }
                }
                self.stmt_boundary();
                self.body(body);
            }
            StmtKind::Import(aliases) => {
                for a in aliases {
                    let path = match &a.asname {
                        Some(_) => a.name.clone(),
                        None => a.bound_name().to_string(),
                    };
                    let v = self.var(a.bound_name());
                    self.emit(Some(v), Op::Import(path), Vec::new(), a.span);
                }
                self.stmt_boundary();
            }
            StmtKind::ImportFrom { module, names, .. } => {
                for a in names {
                    if a.name == "*" {
                        self.emit(None, Op::Nop, Vec::new(), a.span);
                        continue;
                    }
                    let path = match module {
                        Some(m) => format!("{m}.{}", a.name),
                        None => a.name.clone(),
                    };
                    let v = self.var(a.bound_name());
                    self.emit(Some(v), Op::Import(path), Vec::new(), a.span);
                }
                self.stmt_boundary();
            }
            StmtKind::Global(_) | StmtKind::Nonlocal(_) => {}
            StmtKind::Assert { test, msg } => {
                let mut args = vec![self.expr(test, Dest::Temp)];
                if let Some(m) = msg {
                    args.push(self.expr(m, Dest::Temp));
                }
                self.emit(None, Op::Assert, args, span);
                self.stmt_boundary();
            }
            StmtKind::Delete(targets) => {
                for t in targets {
                    match &t.kind {
                        ExprKind::Name(n) => {
                            let v = self.var(n);
                            self.emit(Some(v), Op::Delete, Vec::new(), t.span);
                        }
                        _ => {
                            let o = self.expr(t, Dest::Temp);
                            self.emit(None, Op::Unknown("del"), vec![o], t.span);
                        }
                    }
                }
                self.stmt_boundary();
            }
            StmtKind::Unknown { reads, binds, bodies } => {
                let mut ops = Vec::new();
                for r in reads {
                    ops.push(self.expr(r, Dest::Temp));
                }
                self.emit(None, Op::Test, ops.clone(), span);
                self.header_exc_edge();
                let cond = self.cur;
                let cases: Vec<BlockId> = bodies.iter().map(|_| self.new_block()).collect();
                let after = self.new_block();
                for (b, body) in cases.into_iter().zip(bodies) {
                    self.edge(cond, b, EdgeLabel::BranchTrue);
                    self.cur = b;
                    for name in binds {
                        let v = self.var(name);
                        self.emit(Some(v), Op::Bind(BindKind::MatchCapture), ops.clone(), span);
                    }
                    self.body(body);
                    self.edge(self.cur, after, EdgeLabel::Fallthrough);
                }
                self.edge(cond, after, EdgeLabel::BranchFalse);
                self.cur = after;
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn child_scope(
        &mut self,
        name: &str,
        kind: ScopeKind,
        span: Span,
        params: &[Param],
        returns: Option<Expr>,
        decorators: Vec<Expr>,
        is_async: bool,
        body: &[Stmt],
    ) -> ScopeId {
        let id = self.pb.scopes.len();
        self.pb.scopes.push(None);
        let qualname = if self.cfg.kind == ScopeKind::Module { name.to_string() } else { format!("{}.{name}", self.cfg.qualname) };
        let header = ScopeHeader {
            id,
            name: name.to_string(),
            qualname,
            kind,
            parent: Some(self.cfg.id),
            span,
            params: params.to_vec(),
            returns,
            decorators,
            is_async,
        };
        let cfg = FnBuilder::lower(self.pb, header, body);
        self.pb.scopes[id] = Some(cfg);
        id
    }

    fn lower_if(&mut self, test: &Expr, body: &[Stmt], orelse: &[Stmt]) {
        let t = self.expr(test, Dest::Temp);
        self.emit(None, Op::Test, vec![t], test.span);
        self.header_exc_edge();
        let cond = self.cur;
        let then_b = self.new_block();
        let else_b = if orelse.is_empty() { None } else { Some(self.new_block()) };
        let join = self.new_block();
        self.edge(cond, then_b, EdgeLabel::BranchTrue);
        self.cur = then_b;
        self.body(body);
        self.edge(self.cur, join, EdgeLabel::Fallthrough);
        match else_b {
            Some(e) => {
                self.edge(cond, e, EdgeLabel::BranchFalse);
                self.cur = e;
                self.body(orelse);
                self.edge(self.cur, join, EdgeLabel::Fallthrough);
            }
            None => self.edge(cond, join, EdgeLabel::BranchFalse),
        }
        self.cur = join;
    }

    fn lower_while(&mut self, test: &Expr, body: &[Stmt], orelse: &[Stmt]) {
        let header = self.new_block();
        self.edge(self.cur, header, EdgeLabel::Fallthrough);
        self.cur = header;
        let t = self.expr(test, Dest::Temp);
        self.emit(None, Op::Test, vec![t], test.span);
        self.header_exc_edge();
        let test_end = self.cur;
        let body_b = self.new_block();
        let else_b = if orelse.is_empty() { None } else { Some(self.new_block()) };
        let exit = self.new_block();
        self.edge(test_end, body_b, EdgeLabel::BranchTrue);
        if !is_const_true(test) {
            self.edge(test_end, else_b.unwrap_or(exit), EdgeLabel::BranchFalse);
        }
        self.loops.push(LoopCtx { header, exit, exc_depth: self.exc.len() });
        self.cur = body_b;
        self.body(body);
        self.edge(self.cur, header, EdgeLabel::LoopBack);
        self.loops.pop();
        if let Some(e) = else_b {
            self.cur = e;
            self.body(orelse);
            self.edge(self.cur, exit, EdgeLabel::Fallthrough);
        }
        self.cur = exit;
    }

    fn lower_for(&mut self, target: &Expr, iter: &Expr, body: &[Stmt], orelse: &[Stmt], span: Span) {
        let it = self.expr(iter, Dest::Temp);
        let header = self.new_block();
        self.edge(self.cur, header, EdgeLabel::Fallthrough);
        self.cur = header;
        self.emit(None, Op::IterTest, vec![it.clone()], iter.span);
        self.header_exc_edge();
        let body_b = self.new_block();
        let else_b = if orelse.is_empty() { None } else { Some(self.new_block()) };
        let exit = self.new_block();
        self.edge(header, body_b, EdgeLabel::BranchTrue);
        self.edge(header, else_b.unwrap_or(exit), EdgeLabel::BranchFalse);
        self.loops.push(LoopCtx { header, exit, exc_depth: self.exc.len() });
        self.cur = body_b;
        let item = self.temp();
        self.emit(Some(item), Op::IterNext, vec![it], target.span);
        self.bind_target(target, Operand::Var(item), span);
        self.body(body);
        self.edge(self.cur, header, EdgeLabel::LoopBack);
        self.loops.pop();
        if let Some(e) = else_b {
            self.cur = e;
            self.body(orelse);
            self.edge(self.cur, exit, EdgeLabel::Fallthrough);
        }
        self.cur = exit;
    }

    fn lower_try(&mut self, body: &[Stmt], handlers: &[ExceptHandler], orelse: &[Stmt], finalbody: &[Stmt]) {
        let fin = if finalbody.is_empty() {
            None
        } else {
            let block = self.new_block();
            self.finallys.push(FinallyCtx { block, exc: false, ret: false, jumps: Vec::new() });
            self.exc.push(ExcCtx::Finally(self.finallys.len() - 1));
            Some(self.finallys.len() - 1)
        };
        let dispatch = self.new_block();
        let start = self.new_block();
        self.edge(self.cur, start, EdgeLabel::Fallthrough);
        self.cur = start;
        self.exc.push(ExcCtx::Handler(dispatch));
        // State before the first statement may reach the handler too.
        self.edge(start, dispatch, EdgeLabel::Exception);
        let first = self.new_block();
        self.edge(start, first, EdgeLabel::Fallthrough);
        self.cur = first;
        self.body(body);
        self.exc.pop();
        self.body(orelse);
        let join = self.new_block();
        self.edge(self.cur, join, EdgeLabel::Fallthrough);

        let mut catch_all = false;
        for h in handlers {
            let hb = self.new_block();
            self.edge(dispatch, hb, EdgeLabel::Exception);
            self.cur = hb;
            let ty = h.ty.as_ref().map(|t| self.expr(t, Dest::Temp));
            if is_catch_all(h.ty.as_ref()) {
                catch_all = true;
            }
            if let Some(name) = &h.name {
                let v = self.var(name);
                self.emit(Some(v), Op::Bind(BindKind::ExceptAs), ty.into_iter().collect(), h.span);
            }
            self.body(&h.body);
            self.edge(self.cur, join, EdgeLabel::Fallthrough);
        }
        if !catch_all {
            // Uncaught exceptions leave through the finally block or outward.
            let outer = self.exc.last().copied();
            match (fin, outer) {
                (Some(i), _) => {
                    let f = self.finallys[i].block;
                    self.finallys[i].exc = true;
                    self.edge(dispatch, f, EdgeLabel::Exception);
                }
                _ => self.route_exception(dispatch),
            }
        }
        self.cur = join;

        if let Some(i) = fin {
            self.exc.pop();
            let ctx = self.finallys.pop().expect("finally context");
            debug_assert_eq!(self.finallys.len(), i);
            let normal = self.has_preds(join) && self.reachable_now(join);
            if normal {
                self.edge(join, ctx.block, EdgeLabel::Fallthrough);
            }
            self.cur = ctx.block;
            self.body(finalbody);
            let fend = self.cur;
            if ctx.exc {
                self.route_exception(fend);
            }
            if ctx.ret {
                self.route_return(fend);
            }
            for (l, is_break) in ctx.jumps {
                self.route_jump(fend, l, is_break);
            }
            let after = self.new_block();
            if normal {
                self.edge(fend, after, EdgeLabel::Fallthrough);
            }
            self.cur = after;
        }
    }

    // ----- targets -----

    fn bind_target(&mut self, target: &Expr, value: Operand, span: Span) {
        match &target.kind {
            ExprKind::Name(n) => {
                let v = self.var(n);
                self.emit(Some(v), Op::Copy, vec![value], target.span);
            }
            ExprKind::Tuple(elts) | ExprKind::List(elts) => {
                for (i, el) in elts.iter().enumerate() {
                    let t = self.temp();
                    match &el.kind {
                        ExprKind::Starred(inner) => {
                            self.emit(Some(t), Op::UnpackStar, vec![value.clone()], el.span);
                            self.bind_target(inner, Operand::Var(t), span);
                        }
                        _ => {
                            self.emit(Some(t), Op::UnpackItem(i), vec![value.clone()], el.span);
                            self.bind_target(el, Operand::Var(t), span);
                        }
                    }
                }
            }
            ExprKind::Starred(inner) => self.bind_target(inner, value, span),
            ExprKind::Attribute { value: base, attr } => {
                let attr_path = match target_chain(target) {
                    Some((_, chain)) => chain,
                    None => attr.clone(),
                };
                match root_name(base) {
                    Some(root) => {
                        let extra = self.chain_operands(base);
                        let rv = self.var(root);
                        let mut args = vec![Operand::Var(rv), value];
                        args.extend(extra);
                        self.emit(Some(rv), Op::StoreAttr(attr_path), args, target.span);
                    }
                    None => {
                        let b = self.expr(base, Dest::Temp);
                        self.emit(None, Op::StoreAttr(attr.clone()), vec![b, value], target.span);
                    }
                }
            }
            ExprKind::Subscript { value: base, index } => {
                let idx = self.expr(index, Dest::Temp);
                match root_name(base) {
                    Some(root) => {
                        let extra = self.chain_operands(base);
                        let rv = self.var(root);
                        let mut args = vec![Operand::Var(rv), idx, value];
                        args.extend(extra);
                        self.emit(Some(rv), Op::StoreItem, args, target.span);
                    }
                    None => {
                        let b = self.expr(base, Dest::Temp);
                        self.emit(None, Op::StoreItem, vec![b, idx, value], target.span);
                    }
                }
            }
            _ => {
                self.emit(None, Op::Unknown("assign-target"), vec![value], target.span);
            }
        }
    }

    /// Index expressions inside an attribute/subscript chain (`a[i].b[j]`).
    fn chain_operands(&mut self, e: &Expr) -> Vec<Operand> {
        match &e.kind {
            ExprKind::Attribute { value, .. } => self.chain_operands(value),
            ExprKind::Subscript { value, index } => {
                let mut out = self.chain_operands(value);
                let o = self.expr(index, Dest::Temp);
                if o.var().is_some() {
                    out.push(o);
                }
                out
            }
            _ => Vec::new(),
        }
    }

    // ----- expressions -----

    fn finish_expr(&mut self, op: Op, args: Vec<Operand>, span: Span, dest: Dest) -> Operand {
        let d = match dest {
            Dest::Temp => Some(self.temp()),
            Dest::Var(v) => Some(v),
            Dest::Discard => None,
        };
        self.emit(d, op, args, span);
        d.map(Operand::Var).unwrap_or(Operand::Const(Constant::None))
    }

    fn simple(&mut self, o: Operand, span: Span, dest: Dest) -> Operand {
        match dest {
            Dest::Temp => o,
            Dest::Var(v) => {
                self.emit(Some(v), Op::Copy, vec![o], span);
                Operand::Var(v)
            }
            Dest::Discard => {
                self.emit(None, Op::Eval, vec![o.clone()], span);
                o
            }
        }
    }

    fn expr(&mut self, e: &Expr, dest: Dest) -> Operand {
        let span = e.span;
        match &e.kind {
            ExprKind::Name(n) => {
                let v = self.var(n);
                self.simple(Operand::Var(v), span, dest)
            }
            ExprKind::Constant(c) => self.simple(Operand::Const(c.clone()), span, dest),
            ExprKind::JoinedStr(parts) => {
                let mut literal = String::new();
                let mut args = Vec::new();
                self.fstring_parts(parts, &mut literal, &mut args);
                self.finish_expr(Op::Format { kind: FormatKind::FString, literal }, args, span, dest)
            }
            ExprKind::BinOp { left, op, right } => {
                if *op == BinOp::Mod {
                    if let Some(lit) = left.as_str_constant() {
                        let args = match &right.kind {
                            ExprKind::Tuple(items) => items.iter().map(|i| self.expr(i, Dest::Temp)).collect(),
                            _ => vec![self.expr(right, Dest::Temp)],
                        };
                        let op = Op::Format { kind: FormatKind::Percent, literal: lit.to_string() };
                        return self.finish_expr(op, args, span, dest);
                    }
                }
                let l = self.expr(left, Dest::Temp);
                let r = self.expr(right, Dest::Temp);
                self.finish_expr(Op::BinOp(*op), vec![l, r], span, dest)
            }
            ExprKind::UnaryOp { op, operand } => {
                let o = self.expr(operand, Dest::Temp);
                self.finish_expr(Op::UnaryOp(*op), vec![o], span, dest)
            }
            ExprKind::BoolOp { op, values } => {
                let args = values.iter().map(|v| self.expr(v, Dest::Temp)).collect();
                self.finish_expr(Op::BoolOp(*op), args, span, dest)
            }
            ExprKind::Compare { left, ops, comparators } => {
                let mut args = vec![self.expr(left, Dest::Temp)];
                for c in comparators {
                    args.push(self.expr(c, Dest::Temp));
                }
                self.finish_expr(Op::Compare(ops.clone()), args, span, dest)
            }
            ExprKind::Call { func, args, keywords } => self.call(func, args, keywords, span, dest),
            ExprKind::Attribute { value, attr } => {
                let path = self.path_of(e);
                let base = self.expr(value, Dest::Temp);
                self.finish_expr(Op::GetAttr { attr: attr.clone(), path }, vec![base], span, dest)
            }
            ExprKind::Subscript { value, index } => {
                let b = self.expr(value, Dest::Temp);
                let i = self.expr(index, Dest::Temp);
                self.finish_expr(Op::GetItem, vec![b, i], span, dest)
            }
            ExprKind::Slice { lower, upper, step } => {
                let mut args = Vec::new();
                for p in [lower, upper, step].into_iter().flatten() {
                    args.push(self.expr(p, Dest::Temp));
                }
                self.finish_expr(Op::Slice, args, span, dest)
            }
            ExprKind::Tuple(items) | ExprKind::List(items) | ExprKind::Set(items) => {
                let kind = match &e.kind {
                    ExprKind::Tuple(_) => BuildKind::Tuple,
                    ExprKind::List(_) => BuildKind::List,
                    _ => BuildKind::Set,
                };
                let args = items.iter().map(|i| self.expr(i, Dest::Temp)).collect();
                self.finish_expr(Op::Build(kind), args, span, dest)
            }
            ExprKind::Dict { keys, values } => {
                let mut args = Vec::new();
                for (k, v) in keys.iter().zip(values) {
                    if let Some(k) = k {
                        args.push(self.expr(k, Dest::Temp));
                    }
                    args.push(self.expr(v, Dest::Temp));
                }
                self.finish_expr(Op::Build(BuildKind::Dict), args, span, dest)
            }
            ExprKind::IfExp { test, body, orelse } => {
                let args = vec![self.expr(test, Dest::Temp), self.expr(body, Dest::Temp), self.expr(orelse, Dest::Temp)];
                self.finish_expr(Op::IfExp, args, span, dest)
            }
            ExprKind::Lambda { params, body } => {
                let mut args = Vec::new();
                for p in params {
                    if let Some(d) = &p.default {
                        args.push(self.expr(d, Dest::Temp));
                    }
                }
                let ret = Stmt { kind: StmtKind::Return(Some((**body).clone())), span: body.span };
                let id = self.child_scope("<lambda>", ScopeKind::Function, span, params, None, Vec::new(), false, &[ret]);
                self.finish_expr(Op::MakeFunction(id), args, span, dest)
            }
            ExprKind::Comprehension { kind, elt, value, generators } => {
                self.comp_counter += 1;
                let tag = self.comp_counter;
                self.comp_scopes.push(HashMap::new());
                for g in generators {
                    let it = self.expr(&g.iter, Dest::Temp);
                    let item = self.temp();
                    self.emit(Some(item), Op::IterNext, vec![it], g.iter.span);
                    let mut names = Vec::new();
                    target_names(&g.target, &mut names);
                    for n in names {
                        let v = self.new_var(format!("{n}@{tag}"), VarKind::Comprehension);
                        self.comp_scopes.last_mut().expect("comprehension scope").insert(n, v);
                    }
                    self.bind_target(&g.target, Operand::Var(item), g.target.span);
                    for cond in &g.ifs {
                        self.expr(cond, Dest::Temp);
                    }
                }
                let mut args = vec![self.expr(elt, Dest::Temp)];
                if let Some(v) = value {
                    args.push(self.expr(v, Dest::Temp));
                }
                self.comp_scopes.pop();
                let bk = match kind {
                    ComprehensionKind::List => BuildKind::List,
                    ComprehensionKind::Set => BuildKind::Set,
                    ComprehensionKind::Dict => BuildKind::Dict,
                    ComprehensionKind::Generator => BuildKind::Generator,
                };
                self.finish_expr(Op::Build(bk), args, span, dest)
            }
            ExprKind::Starred(inner) => self.expr(inner, dest),
            ExprKind::NamedExpr { target, value } => {
                let v = self.var(target);
                self.expr(value, Dest::Var(v));
                match dest {
                    Dest::Var(d) => {
                        self.emit(Some(d), Op::Copy, vec![Operand::Var(v)], span);
                        Operand::Var(d)
                    }
                    _ => Operand::Var(v),
                }
            }
            ExprKind::Unknown { what, operands } => {
                let args = operands.iter().map(|o| self.expr(o, Dest::Temp)).collect();
                self.finish_expr(Op::Unknown(what), args, span, dest)
            }
        }
    }

    fn fstring_parts(&mut self, parts: &[FStringPart], literal: &mut String, args: &mut Vec<Operand>) {
        for p in parts {
            match p {
                FStringPart::Literal(s) => literal.push_str(s),
                FStringPart::Value { value, format_spec, .. } => {
                    args.push(self.expr(value, Dest::Temp));
                    let mut spec_lit = String::new();
                    self.fstring_parts(format_spec, &mut spec_lit, args);
                }
            }
        }
    }

    fn call(&mut self, func: &Expr, args: &[Expr], keywords: &[Keyword], span: Span, dest: Dest) -> Operand {
        if let ExprKind::Attribute { value, attr } = &func.kind {
            if let (Some(lit), "format") = (value.as_str_constant(), attr.as_str()) {
                let mut ops = Vec::new();
                for a in args {
                    ops.push(self.expr(a, Dest::Temp));
                }
                for k in keywords {
                    ops.push(self.expr(&k.value, Dest::Temp));
                }
                let op = Op::Format { kind: FormatKind::FormatMethod, literal: lit.to_string() };
                return self.finish_expr(op, ops, span, dest);
            }
        }
        let path = self.path_of(func);
        let mut ops = Vec::new();
        let has_receiver = match &func.kind {
            ExprKind::Name(_) => false,
            ExprKind::Attribute { value, .. } => {
                ops.push(self.expr(value, Dest::Temp));
                true
            }
            _ => {
                ops.push(self.expr(func, Dest::Temp));
                true
            }
        };
        let mut starred = Vec::new();
        for (i, a) in args.iter().enumerate() {
            if matches!(a.kind, ExprKind::Starred(_)) {
                starred.push(i);
            }
            ops.push(self.expr(a, Dest::Temp));
        }
        let mut kw_names = Vec::new();
        for k in keywords {
            ops.push(self.expr(&k.value, Dest::Temp));
            kw_names.push(k.arg.clone());
        }
        let info = CallInfo { path, has_receiver, positional: args.len(), keywords: kw_names, starred };
        let mutated = self.mutation_root(func, &info);
        let result = self.finish_expr(Op::Call(info), ops.clone(), span, dest);
        if let Some((root, method)) = mutated {
            let carried: Vec<Operand> = ops.into_iter().skip(1).filter(|o| o.var().is_some()).collect();
            if !carried.is_empty() {
                let rv = self.var(&root);
                let mut args = vec![Operand::Var(rv)];
                args.extend(carried);
                self.emit_raw(Some(rv), Op::Mutate(method), args, span, true);
            }
        }
        result
    }

    /// `obj.method(args)` may store its arguments into `obj`; returns the
    /// root variable name of the receiver chain when it is a local value.
    fn mutation_root(&self, func: &Expr, info: &CallInfo) -> Option<(String, String)> {
        let ExprKind::Attribute { value, attr } = &func.kind else { return None };
        if info.positional + info.keywords.len() == 0 {
            return None;
        }
        let root = root_name(value)?;
        if self.pb.imports.contains_key(root) {
            return None;
        }
        Some((root.to_string(), attr.clone()))
    }

    fn path_of(&self, e: &Expr) -> Option<String> {
        match &e.kind {
            ExprKind::Name(n) => Some(self.pb.imports.get(n).cloned().unwrap_or_else(|| n.clone())),
            ExprKind::Attribute { value, attr } => self.path_of(value).map(|p| format!("{p}.{attr}")),
            ExprKind::Call { func, .. } => self.path_of(func).map(|p| format!("{p}()")),
            ExprKind::Subscript { value, .. } => self.path_of(value).map(|p| format!("{p}[]")),
            ExprKind::Constant(Constant::Str(_)) | ExprKind::JoinedStr(_) => Some("str".into()),
            _ => None,
        }
    }
}

fn bfs(n: usize, edges: &[Edge], starts: impl Iterator<Item = BlockId>) -> Vec<bool> {
    let mut adj = vec![Vec::new(); n];
    for e in edges {
        adj[e.from].push(e.to);
    }
    let mut seen = vec![false; n];
    let mut q = VecDeque::new();
    for s in starts {
        if !seen[s] {
            seen[s] = true;
            q.push_back(s);
        }
    }
    while let Some(b) = q.pop_front() {
        for &t in &adj[b] {
            if !seen[t] {
                seen[t] = true;
                q.push_back(t);
            }
        }
    }
    seen
}

fn is_const_true(e: &Expr) -> bool {
    match &e.kind {
        ExprKind::Constant(Constant::Bool(b)) => *b,
        ExprKind::Constant(Constant::Int(i)) => *i != 0,
        ExprKind::Constant(Constant::Str(s)) => !s.is_empty(),
        _ => false,
    }
}

fn is_catch_all(ty: Option<&Expr>) -> bool {
    match ty {
        None => true,
        Some(e) => matches!(&e.kind, ExprKind::Name(n) if n == "Exception" || n == "BaseException"),
    }
}

pub(crate) fn root_name(e: &Expr) -> Option<&str> {
    match &e.kind {
        ExprKind::Name(n) => Some(n),
        ExprKind::Attribute { value, .. } | ExprKind::Subscript { value, .. } => root_name(value),
        _ => None,
    }
}

/// For `a.b.c` returns ("a", "b.c").
fn target_chain(e: &Expr) -> Option<(String, String)> {
    let full = e.dotted_name()?;
    let (root, rest) = full.split_once('.')?;
    Some((root.to_string(), rest.to_string()))
}

pub(crate) fn target_names(e: &Expr, out: &mut Vec<String>) {
    match &e.kind {
        ExprKind::Name(n) => out.push(n.clone()),
        ExprKind::Tuple(items) | ExprKind::List(items) => items.iter().for_each(|i| target_names(i, out)),
        ExprKind::Starred(inner) => target_names(inner, out),
        _ => {}
    }
}

/// Names bound in a scope body (excluding nested function/class bodies) and
/// names declared `global`/`nonlocal`.
pub(crate) fn bound_names(body: &[Stmt]) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut bound = BTreeSet::new();
    let mut declared = BTreeSet::new();
    collect_bound(body, &mut bound, &mut declared);
    (bound, declared)
}

fn collect_bound(body: &[Stmt], bound: &mut BTreeSet<String>, declared: &mut BTreeSet<String>) {
    for s in body {
        let mut names = Vec::new();
        match &s.kind {
            StmtKind::Assign { targets, .. } => targets.iter().for_each(|t| target_names(t, &mut names)),
            StmtKind::AugAssign { target, .. } | StmtKind::AnnAssign { target, .. } => target_names(target, &mut names),
            StmtKind::For { target, .. } => target_names(target, &mut names),
            StmtKind::With { items, .. } => {
                for it in items {
                    if let Some(t) = &it.target {
                        target_names(t, &mut names);
                    }
                }
            }
            StmtKind::Try { handlers, .. } => names.extend(handlers.iter().filter_map(|h| h.name.clone())),
            StmtKind::Import(aliases) => names.extend(aliases.iter().map(|a| a.bound_name().to_string())),
            StmtKind::ImportFrom { names: aliases, .. } => {
                names.extend(aliases.iter().filter(|a| a.name != "*").map(|a| a.bound_name().to_string()))
            }
            StmtKind::FunctionDef(f) => names.push(f.name.clone()),
            StmtKind::ClassDef(c) => names.push(c.name.clone()),
            StmtKind::Delete(targets) => targets.iter().for_each(|t| target_names(t, &mut names)),
            StmtKind::Unknown { binds, .. } => names.extend(binds.iter().cloned()),
            StmtKind::Global(ns) | StmtKind::Nonlocal(ns) => declared.extend(ns.iter().cloned()),
            _ => {}
        }
        if !matches!(s.kind, StmtKind::FunctionDef(_) | StmtKind::ClassDef(_)) {
            for e in s.exprs() {
                walrus_targets(e, &mut names);
            }
        }
        bound.extend(names);
        if !matches!(s.kind, StmtKind::FunctionDef(_) | StmtKind::ClassDef(_)) {
            for b in s.bodies() {
                collect_bound(b, bound, declared);
            }
        }
    }
}

fn walrus_targets(e: &Expr, out: &mut Vec<String>) {
    if let ExprKind::Lambda { .. } = e.kind {
        return;
    }
    if let ExprKind::NamedExpr { target, .. } = &e.kind {
        out.push(target.clone());
    }
    for c in e.children() {
        walrus_targets(c, out);
    }
}
