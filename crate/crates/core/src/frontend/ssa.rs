//! SSA conversion: dominators (Cooper/Harvey/Kennedy), dominance-frontier
//! φ placement pruned by liveness, and stack-based renaming.
//!
//! Dead regions (blocks unreachable from entry) start with their own entry
//! definitions, so they are renamed independently; edges from a dead block
//! into live code are ignored for SSA purposes.

use super::ir::*;
use serde::Serialize;
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct ValueId(pub u32);

impl ValueId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DefSite {
    Instr { block: BlockId, index: usize },
    Phi { block: BlockId, index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UseSite {
    Instr { block: BlockId, index: usize, arg: usize },
    Phi { block: BlockId, index: usize, pos: usize },
}

#[derive(Debug, Clone)]
pub struct ValueInfo {
    pub var: VarId,
    pub version: u32,
    pub def: DefSite,
}

#[derive(Debug, Clone)]
pub struct Phi {
    pub dest: ValueId,
    pub var: VarId,
    /// One operand per SSA predecessor, in `ssa_preds` order.
    pub incoming: Vec<(BlockId, ValueId)>,
}

#[derive(Debug, Clone)]
pub struct SsaProgram {
    pub cfg: Cfg,
    pub values: Vec<ValueInfo>,
    pub phis: Vec<Vec<Phi>>,
    /// `defs[b][i]`: version defined by instruction `i` of block `b`.
    pub defs: Vec<Vec<Option<ValueId>>>,
    /// `uses[b][i][k]`: version read by operand `k` (None for constants).
    pub uses: Vec<Vec<Vec<Option<ValueId>>>>,
    /// Def-use chains.
    pub users: Vec<Vec<UseSite>>,
    pub ssa_preds: Vec<Vec<BlockId>>,
    /// Immediate dominators; `None` for region roots and blocks outside SSA.
    pub idom: Vec<Option<BlockId>>,
    /// Version of each variable live at the exit block, if exit is reached.
    pub exit_values: Vec<Option<ValueId>>,
}

impl SsaProgram {
    pub fn value_name(&self, v: ValueId) -> String {
        let info = &self.values[v.index()];
        format!("{}_{}", self.cfg.var_name(info.var), info.version)
    }

    pub fn var_of(&self, v: ValueId) -> VarId {
        self.values[v.index()].var
    }

    pub fn def_instr(&self, v: ValueId) -> Option<&Instr> {
        match self.values[v.index()].def {
            DefSite::Instr { block, index } => Some(&self.cfg.blocks[block].instrs[index]),
            DefSite::Phi { .. } => None,
        }
    }

    pub fn def_span(&self, v: ValueId) -> super::ast::Span {
        match self.values[v.index()].def {
            DefSite::Instr { block, index } => self.cfg.blocks[block].instrs[index].span,
            DefSite::Phi { block, .. } => self.block_span(block),
        }
    }

    /// Span of the first user statement of a block (or the scope span).
    pub fn block_span(&self, b: BlockId) -> super::ast::Span {
        self.cfg.blocks[b].instrs.iter().find(|i| !i.synthetic).map(|i| i.span).unwrap_or(self.cfg.span)
    }

    pub fn phi(&self, block: BlockId, index: usize) -> &Phi {
        &self.phis[block][index]
    }

    /// All value operands of an instruction.
    pub fn instr_uses(&self, block: BlockId, index: usize) -> impl Iterator<Item = ValueId> + '_ {
        self.uses[block][index].iter().flatten().copied()
    }
}

/// Immediate dominators over `succs`, from a single start node. Nodes not
/// reachable from `start` get `None`; `start` maps to itself.
pub fn dominators(n: usize, succs: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut order = Vec::with_capacity(n);
    let mut visited = vec![false; n];
    let mut stack: Vec<(usize, usize)> = vec![(start, 0)];
    visited[start] = true;
    while let Some((node, i)) = stack.pop() {
        if i < succs[node].len() {
            stack.push((node, i + 1));
            let s = succs[node][i];
            if !visited[s] {
                visited[s] = true;
                stack.push((s, 0));
            }
        } else {
            order.push(node);
        }
    }
    order.reverse();
    let mut rpo = vec![usize::MAX; n];
    for (i, &b) in order.iter().enumerate() {
        rpo[b] = i;
    }
    let mut preds = vec![Vec::new(); n];
    for (b, ss) in succs.iter().enumerate() {
        if !visited[b] {
            continue;
        }
        for &s in ss {
            preds[s].push(b);
        }
    }
    let mut idom: Vec<Option<usize>> = vec![None; n];
    idom[start] = Some(start);
    let intersect = |idom: &[Option<usize>], mut a: usize, mut b: usize| {
        while a != b {
            while rpo[a] > rpo[b] {
                a = idom[a].expect("processed");
            }
            while rpo[b] > rpo[a] {
                b = idom[b].expect("processed");
            }
        }
        a
    };
    let mut changed = true;
    while changed {
        changed = false;
        for &b in order.iter().skip(1) {
            let mut new: Option<usize> = None;
            for &p in &preds[b] {
                if idom[p].is_none() {
                    continue;
                }
                new = Some(match new {
                    None => p,
                    Some(cur) => intersect(&idom, p, cur),
                });
            }
            if new.is_some() && idom[b] != new {
                idom[b] = new;
                changed = true;
            }
        }
    }
    idom
}

pub fn to_ssa(cfg: &Cfg) -> SsaProgram {
    let n = cfg.blocks.len();
    let nvars = cfg.vars.len();
    let live_blocks = cfg.reachable_from_entry();
    let is_root = |b: BlockId| b == cfg.entry || cfg.blocks[b].region_root;

    // SSA graph: drop edges from dead code into live code.
    let mut succs: Vec<Vec<BlockId>> = vec![Vec::new(); n + 1];
    let mut ssa_preds: Vec<Vec<BlockId>> = vec![Vec::new(); n];
    for e in &cfg.edges {
        if !live_blocks[e.from] && live_blocks[e.to] {
            continue;
        }
        if is_root(e.to) {
            continue;
        }
        if !succs[e.from].contains(&e.to) {
            succs[e.from].push(e.to);
            ssa_preds[e.to].push(e.from);
        }
    }
    let virt = n;
    for b in 0..n {
        if is_root(b) {
            succs[virt].push(b);
        }
    }
    let idom_v = dominators(n + 1, &succs, virt);
    let in_ssa: Vec<bool> = (0..n).map(|b| idom_v[b].is_some()).collect();
    let idom: Vec<Option<BlockId>> = (0..n).map(|b| idom_v[b].filter(|&d| d != virt)).collect();

    // Dominance frontiers over non-root join blocks.
    let mut df: Vec<Vec<BlockId>> = vec![Vec::new(); n];
    for b in 0..n {
        if !in_ssa[b] || ssa_preds[b].len() < 2 {
            continue;
        }
        let target = idom_v[b].expect("in ssa");
        for &p in &ssa_preds[b] {
            let mut runner = p;
            while runner != target && runner != virt {
                if !df[runner].contains(&b) {
                    df[runner].push(b);
                }
                match idom_v[runner] {
                    Some(d) => runner = d,
                    None => break,
                }
            }
        }
    }

    // Liveness (pruning). User variables count as used at exit.
    let mut use_before_def = vec![vec![false; nvars]; n];
    let mut defined = vec![vec![false; nvars]; n];
    for b in 0..n {
        for ins in &cfg.blocks[b].instrs {
            for a in &ins.args {
                if let Operand::Var(v) = a {
                    if !defined[b][*v] {
                        use_before_def[b][*v] = true;
                    }
                }
            }
            if let Some(d) = ins.dest {
                defined[b][d] = true;
            }
        }
    }
    for v in 0..nvars {
        if cfg.vars[v].kind != VarKind::Temp {
            use_before_def[cfg.exit][v] = true;
        }
    }
    let mut live_in = use_before_def.clone();
    let mut changed = true;
    while changed {
        changed = false;
        for b in (0..n).rev() {
            for &s in &succs[b] {
                for v in 0..nvars {
                    if live_in[s][v] && !defined[b][v] && !live_in[b][v] {
                        live_in[b][v] = true;
                        changed = true;
                    }
                }
            }
        }
    }

    // φ placement.
    let mut phi_vars: Vec<Vec<VarId>> = vec![Vec::new(); n];
    for v in 0..nvars {
        let mut has_phi = vec![false; n];
        let mut work: Vec<BlockId> = (0..n).filter(|&b| in_ssa[b] && defined[b][v]).collect();
        let mut queued = vec![false; n];
        for &b in &work {
            queued[b] = true;
        }
        while let Some(b) = work.pop() {
            for &f in &df[b] {
                if has_phi[f] || is_root(f) || !live_in[f][v] {
                    continue;
                }
                has_phi[f] = true;
                phi_vars[f].push(v);
                if !queued[f] {
                    queued[f] = true;
                    work.push(f);
                }
            }
        }
    }

    let mut ssa = SsaProgram {
        cfg: cfg.clone(),
        values: Vec::new(),
        phis: vec![Vec::new(); n],
        defs: cfg.blocks.iter().map(|b| vec![None; b.instrs.len()]).collect(),
        uses: cfg.blocks.iter().map(|b| b.instrs.iter().map(|i| vec![None; i.args.len()]).collect()).collect(),
        users: Vec::new(),
        ssa_preds,
        idom,
        exit_values: vec![None; nvars],
    };
    for b in 0..n {
        for &v in &phi_vars[b] {
            ssa.phis[b].push(Phi { dest: ValueId(u32::MAX), var: v, incoming: Vec::new() });
        }
    }

    let mut children: Vec<Vec<BlockId>> = vec![Vec::new(); n + 1];
    for b in 0..n {
        if let Some(d) = idom_v[b] {
            children[d].push(b);
        }
    }
    let mut r = Renamer {
        ssa: &mut ssa,
        stacks: vec![Vec::new(); nvars],
        counters: vec![0; nvars],
        succs: &succs,
    };
    // Walk the dominator tree iteratively.
    enum Step {
        Enter(BlockId),
        Exit(Vec<VarId>),
    }
    let mut work: Vec<Step> = children[virt].iter().rev().map(|&c| Step::Enter(c)).collect();
    while let Some(step) = work.pop() {
        match step {
            Step::Enter(b) => {
                let pushed = r.visit(b);
                work.push(Step::Exit(pushed));
                for &c in children[b].iter().rev() {
                    work.push(Step::Enter(c));
                }
            }
            Step::Exit(pushed) => {
                for v in pushed {
                    r.stacks[v].pop();
                }
            }
        }
    }

    let mut users = vec![Vec::new(); ssa.values.len()];
    for b in 0..n {
        for (i, args) in ssa.uses[b].iter().enumerate() {
            for (k, u) in args.iter().enumerate() {
                if let Some(u) = u {
                    users[u.index()].push(UseSite::Instr { block: b, index: i, arg: k });
                }
            }
        }
        for (i, phi) in ssa.phis[b].iter().enumerate() {
            for (pos, &(_, u)) in phi.incoming.iter().enumerate() {
                users[u.index()].push(UseSite::Phi { block: b, index: i, pos });
            }
        }
    }
    ssa.users = users;
    ssa
}

fn new_value(values: &mut Vec<ValueInfo>, var: VarId, def: DefSite, counters: &mut [u32]) -> ValueId {
    let version = counters[var];
    counters[var] += 1;
    values.push(ValueInfo { var, version, def });
    ValueId((values.len() - 1) as u32)
}

struct Renamer<'a> {
    ssa: &'a mut SsaProgram,
    stacks: Vec<Vec<ValueId>>,
    counters: Vec<u32>,
    succs: &'a [Vec<BlockId>],
}

impl Renamer<'_> {
    fn visit(&mut self, b: BlockId) -> Vec<VarId> {
        let mut pushed = Vec::new();
        for index in 0..self.ssa.phis[b].len() {
            let var = self.ssa.phis[b][index].var;
            let v = new_value(&mut self.ssa.values, var, DefSite::Phi { block: b, index }, &mut self.counters);
            self.ssa.phis[b][index].dest = v;
            self.stacks[var].push(v);
            pushed.push(var);
        }
        for index in 0..self.ssa.cfg.blocks[b].instrs.len() {
            let ins = &self.ssa.cfg.blocks[b].instrs[index];
            for (k, a) in ins.args.iter().enumerate() {
                if let Operand::Var(v) = a {
                    self.ssa.uses[b][index][k] = self.stacks[*v].last().copied();
                }
            }
            if let Some(d) = ins.dest {
                let v = new_value(&mut self.ssa.values, d, DefSite::Instr { block: b, index }, &mut self.counters);
                self.ssa.defs[b][index] = Some(v);
                self.stacks[d].push(v);
                pushed.push(d);
            }
        }
        for &s in &self.succs[b] {
            let Some(pos) = self.ssa.ssa_preds[s].iter().position(|&p| p == b) else { continue };
            for phi in &mut self.ssa.phis[s] {
                if let Some(&top) = self.stacks[phi.var].last() {
                    if phi.incoming.len() <= pos {
                        phi.incoming.resize(pos + 1, (usize::MAX, top));
                    }
                    phi.incoming[pos] = (b, top);
                }
            }
        }
        if b == self.ssa.cfg.exit {
            for (var, st) in self.stacks.iter().enumerate() {
                self.ssa.exit_values[var] = st.last().copied();
            }
        }
        pushed
    }
}

// ----- text dumps -----

/// One paragraph per block, edges listed after the statements.
pub fn render_cfg(cfg: &Cfg) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "scope {} ({})", cfg.qualname, kind_name(cfg.kind));
    for (b, blk) in cfg.blocks.iter().enumerate() {
        let _ = writeln!(out, "block {b}{}", block_tags(cfg, b));
        for ins in &blk.instrs {
            if hide(cfg, ins) {
                continue;
            }
            let _ = writeln!(out, "  {:>5}  {}", ins.span.to_string(), cfg.render_instr(ins));
        }
        for e in cfg.succs(b) {
            let _ = writeln!(out, "  -> {} {}", e.to, e.label);
        }
        out.push('\n');
    }
    out
}

pub fn render_ssa(ssa: &SsaProgram) -> String {
    let cfg = &ssa.cfg;
    let mut out = String::new();
    let _ = writeln!(out, "scope {} ({})", cfg.qualname, kind_name(cfg.kind));
    for (b, blk) in cfg.blocks.iter().enumerate() {
        let preds: Vec<String> = ssa.ssa_preds[b].iter().map(|p| p.to_string()).collect();
        let _ = writeln!(out, "block {b}{} preds [{}]", block_tags(cfg, b), preds.join(", "));
        for phi in &ssa.phis[b] {
            let ops: Vec<String> = phi.incoming.iter().map(|(p, v)| format!("{p}: {}", ssa.value_name(*v))).collect();
            let _ = writeln!(out, "  {:>5}  {} = phi({})", "", ssa.value_name(phi.dest), ops.join(", "));
        }
        for (i, ins) in blk.instrs.iter().enumerate() {
            if hide(cfg, ins) {
                continue;
            }
            let args: Vec<String> = ins
                .args
                .iter()
                .enumerate()
                .map(|(k, a)| match (a, ssa.uses[b][i][k]) {
                    (Operand::Var(_), Some(v)) => ssa.value_name(v),
                    (Operand::Var(v), None) => format!("{}_?", cfg.var_name(*v)),
                    (c, _) => cfg.render_operand(c),
                })
                .collect();
            let dest = ssa.defs[b][i].map(|v| ssa.value_name(v));
            let _ = writeln!(out, "  {:>5}  {}", ins.span.to_string(), cfg.render_instr_with(ins, dest, &args));
        }
        out.push('\n');
    }
    out
}

fn hide(cfg: &Cfg, ins: &Instr) -> bool {
    matches!(ins.op, Op::Entry(_)) && ins.dest.map(|d| cfg.vars[d].kind == VarKind::Temp).unwrap_or(false)
}

fn kind_name(k: ScopeKind) -> &'static str {
    match k {
        ScopeKind::Module => "module",
        ScopeKind::Function => "function",
        ScopeKind::Method => "method",
        ScopeKind::Class => "class",
    }
}

fn block_tags(cfg: &Cfg, b: BlockId) -> String {
    let mut tags = Vec::new();
    if b == cfg.entry {
        tags.push("entry");
    }
    if b == cfg.exit {
        tags.push("exit");
    }
    if cfg.blocks[b].unreachable {
        tags.push("unreachable");
    }
    if tags.is_empty() {
        String::new()
    } else {
        format!(" ({})", tags.join(", "))
    }
}
