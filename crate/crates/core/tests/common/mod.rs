//! Random program generators and independent oracles shared by the
//! integration tests and the acceptance target.
#![allow(dead_code)]

use pa_reward::frontend::ast::{BinOp, CmpOp, Constant, UnaryOp};
use pa_reward::frontend::ir::{Cfg, EdgeLabel, EntryKind, Op, Operand, VarKind};
use pa_reward::frontend::ssa::{DefSite, SsaProgram, UseSite};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

pub fn rng(seed: u64) -> ChaCha8Rng {
    rand::SeedableRng::seed_from_u64(seed)
}

fn indent(depth: usize) -> String {
    "    ".repeat(depth)
}

// ---------------------------------------------------------------------------
// Integer programs: source-level interpreter vs SSA interpreter.

#[derive(Debug, Clone)]
pub enum IntStmt {
    Const(usize, i64),
    Bin(usize, usize, char, usize),
    Copy(usize, usize),
    If(usize, usize, Vec<IntStmt>, Vec<IntStmt>),
    /// Loop with its own counter: `cK = 0; while cK < n: body; cK = cK + 1`.
    Loop(usize, i64, Vec<IntStmt>),
}

pub struct IntProgram {
    pub vars: usize,
    pub loops: usize,
    pub body: Vec<IntStmt>,
}

const INT_VARS: [&str; 5] = ["a", "b", "c", "d", "e"];

pub fn gen_int_program(r: &mut ChaCha8Rng, straight_line: bool) -> IntProgram {
    let mut p = IntProgram { vars: INT_VARS.len(), loops: 0, body: Vec::new() };
    p.body = gen_int_suite(r, &mut p.loops, 1..10, if straight_line { 0 } else { 2 });
    p
}

fn gen_int_suite(r: &mut ChaCha8Rng, loops: &mut usize, n: std::ops::Range<usize>, depth: usize) -> Vec<IntStmt> {
    let n = r.gen_range(n);
    let v = |r: &mut ChaCha8Rng| r.gen_range(0..INT_VARS.len());
    (0..n)
        .map(|_| match r.gen_range(0..if depth > 0 { 6 } else { 4 }) {
            0 => IntStmt::Const(v(r), r.gen_range(-5..10)),
            1 => IntStmt::Copy(v(r), v(r)),
            2 | 3 => IntStmt::Bin(v(r), v(r), *['+', '-', '*'].choose(r).unwrap(), v(r)),
            4 => {
                let then = gen_int_suite(r, loops, 1..4, depth - 1);
                let orelse = gen_int_suite(r, loops, 0..3, depth - 1);
                IntStmt::If(v(r), v(r), then, orelse)
            }
            _ => {
                let id = *loops;
                *loops += 1;
                IntStmt::Loop(id, r.gen_range(0..4), gen_int_suite(r, loops, 1..4, depth - 1))
            }
        })
        .collect()
}

impl IntProgram {
    pub fn source(&self) -> String {
        let mut s = String::new();
        for name in INT_VARS {
            s.push_str(&format!("{name} = 1\n"));
        }
        for k in 0..self.loops {
            s.push_str(&format!("c{k} = 0\n"));
        }
        render_int(&self.body, 0, &mut s);
        s
    }

    /// Final values of every variable (user vars and loop counters).
    pub fn interpret(&self) -> BTreeMap<String, i64> {
        let mut env: BTreeMap<String, i64> = INT_VARS.iter().map(|n| (n.to_string(), 1)).collect();
        for k in 0..self.loops {
            env.insert(format!("c{k}"), 0);
        }
        exec_int(&self.body, &mut env);
        env
    }
}

fn render_int(body: &[IntStmt], depth: usize, s: &mut String) {
    let ind = indent(depth);
    for st in body {
        match st {
            IntStmt::Const(x, k) => s.push_str(&format!("{ind}{} = {k}\n", INT_VARS[*x])),
            IntStmt::Copy(x, y) => s.push_str(&format!("{ind}{} = {}\n", INT_VARS[*x], INT_VARS[*y])),
            IntStmt::Bin(x, y, op, z) => s.push_str(&format!("{ind}{} = {} {op} {}\n", INT_VARS[*x], INT_VARS[*y], INT_VARS[*z])),
            IntStmt::If(x, y, then, orelse) => {
                s.push_str(&format!("{ind}if {} < {}:\n", INT_VARS[*x], INT_VARS[*y]));
                render_int(then, depth + 1, s);
                if !orelse.is_empty() {
                    s.push_str(&format!("{ind}else:\n"));
                    render_int(orelse, depth + 1, s);
                }
            }
            IntStmt::Loop(k, n, body) => {
                s.push_str(&format!("{ind}c{k} = 0\n{ind}while c{k} < {n}:\n"));
                render_int(body, depth + 1, s);
                s.push_str(&format!("{}c{k} = c{k} + 1\n", indent(depth + 1)));
            }
        }
    }
}

fn bin(op: char, a: i64, b: i64) -> i64 {
    match op {
        '+' => a.wrapping_add(b),
        '-' => a.wrapping_sub(b),
        _ => a.wrapping_mul(b),
    }
}

fn exec_int(body: &[IntStmt], env: &mut BTreeMap<String, i64>) {
    let get = |env: &BTreeMap<String, i64>, v: usize| env[INT_VARS[v]];
    for st in body {
        match st {
            IntStmt::Const(x, k) => {
                env.insert(INT_VARS[*x].into(), *k);
            }
            IntStmt::Copy(x, y) => {
                let v = get(env, *y);
                env.insert(INT_VARS[*x].into(), v);
            }
            IntStmt::Bin(x, y, op, z) => {
                let v = bin(*op, get(env, *y), get(env, *z));
                env.insert(INT_VARS[*x].into(), v);
            }
            IntStmt::If(x, y, then, orelse) => {
                if get(env, *x) < get(env, *y) {
                    exec_int(then, env)
                } else {
                    exec_int(orelse, env)
                }
            }
            IntStmt::Loop(k, n, body) => {
                let c = format!("c{k}");
                env.insert(c.clone(), 0);
                while env[&c] < *n {
                    exec_int(body, env);
                    let v = env[&c] + 1;
                    env.insert(c.clone(), v);
                }
            }
        }
    }
}

/// Executes the module scope of an SSA program over integers and returns
/// the exit version of every user variable.
pub fn interpret_ssa(ssa: &SsaProgram) -> Result<BTreeMap<String, i64>, String> {
    let cfg = &ssa.cfg;
    let mut vals: Vec<Option<i64>> = vec![None; ssa.values.len()];
    let mut block = cfg.entry;
    let mut prev: Option<usize> = None;
    let mut steps = 0usize;
    loop {
        steps += 1;
        if steps > 100_000 {
            return Err("step limit".into());
        }
        if let Some(p) = prev {
            let incoming: Vec<(usize, Option<i64>)> = ssa.phis[block]
                .iter()
                .map(|phi| {
                    let (_, v) = phi.incoming.iter().find(|(b, _)| *b == p).ok_or("phi without edge from predecessor")?;
                    Ok((phi.dest.index(), vals[v.index()]))
                })
                .collect::<Result<_, String>>()?;
            for (d, v) in incoming {
                vals[d] = v;
            }
        }
        let mut cond = None;
        for (i, ins) in cfg.blocks[block].instrs.iter().enumerate() {
            let arg = |k: usize| -> Result<i64, String> {
                match (&ins.args[k], ssa.uses[block][i][k]) {
                    (Operand::Const(Constant::Int(n)), _) => Ok(*n),
                    (Operand::Var(_), Some(v)) => vals[v.index()].ok_or_else(|| format!("read of undefined {}", ssa.value_name(v))),
                    (o, _) => Err(format!("unsupported operand {o:?}")),
                }
            };
            let result = match &ins.op {
                Op::Entry(EntryKind::Undefined) => None,
                Op::Copy => Some(arg(0)?),
                Op::UnaryOp(UnaryOp::Neg) => Some(arg(0)?.wrapping_neg()),
                Op::BinOp(BinOp::Add) => Some(bin('+', arg(0)?, arg(1)?)),
                Op::BinOp(BinOp::Sub) => Some(bin('-', arg(0)?, arg(1)?)),
                Op::BinOp(BinOp::Mult) => Some(bin('*', arg(0)?, arg(1)?)),
                Op::Compare(ops) if ops == &[CmpOp::Lt] => Some(i64::from(arg(0)? < arg(1)?)),
                Op::Test => {
                    cond = Some(arg(0)? != 0);
                    None
                }
                other => return Err(format!("unsupported op {other:?}")),
            };
            if let (Some(d), Some(v)) = (ssa.defs[block][i], result) {
                vals[d.index()] = Some(v);
            }
        }
        if block == cfg.exit {
            break;
        }
        let succs: Vec<_> = cfg.succs(block).collect();
        let next = match succs.as_slice() {
            [e] => e.to,
            _ => {
                let want = if cond.ok_or("branch without test")? { EdgeLabel::BranchTrue } else { EdgeLabel::BranchFalse };
                succs.iter().find(|e| e.label == want).ok_or("missing branch edge")?.to
            }
        };
        prev = Some(block);
        block = next;
    }
    let mut out = BTreeMap::new();
    for (var, info) in cfg.vars.iter().enumerate() {
        if info.kind != VarKind::Local {
            continue;
        }
        if let Some(v) = ssa.exit_values[var] {
            if let Some(x) = vals[v.index()] {
                out.insert(info.name.clone(), x);
            }
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Control-flow shapes with syntactic liveness of marker statements.

#[derive(Debug, Clone)]
pub enum FlowStmt {
    Marker(usize),
    Return,
    Raise,
    Break,
    Continue,
    If(Vec<FlowStmt>, Vec<FlowStmt>),
    While(Vec<FlowStmt>),
    WhileTrue(Vec<FlowStmt>),
    For(Vec<FlowStmt>),
    Try(Vec<FlowStmt>, Vec<FlowStmt>),
}

pub struct FlowProgram {
    pub body: Vec<FlowStmt>,
    pub markers: usize,
}

pub fn gen_flow_program(r: &mut ChaCha8Rng) -> FlowProgram {
    let mut markers = 0;
    let body = gen_flow_suite(r, &mut markers, 1..7, 3, false);
    FlowProgram { body, markers }
}

fn gen_flow_suite(r: &mut ChaCha8Rng, markers: &mut usize, n: std::ops::Range<usize>, depth: usize, in_loop: bool) -> Vec<FlowStmt> {
    let n = if n.is_empty() { 0 } else { r.gen_range(n) };
    let mut out = Vec::new();
    for _ in 0..n {
        let pick = r.gen_range(0..if depth > 0 { 14 } else { 8 });
        let st = match pick {
            0..=3 => {
                *markers += 1;
                FlowStmt::Marker(*markers - 1)
            }
            4 => FlowStmt::Return,
            5 => FlowStmt::Raise,
            6 if in_loop => FlowStmt::Break,
            7 if in_loop => FlowStmt::Continue,
            6 | 7 => {
                *markers += 1;
                FlowStmt::Marker(*markers - 1)
            }
            8 | 9 => {
                let then = gen_flow_suite(r, markers, 1..4, depth - 1, in_loop);
                let orelse = gen_flow_suite(r, markers, 0..3, depth - 1, in_loop);
                FlowStmt::If(then, orelse)
            }
            10 => FlowStmt::While(gen_flow_suite(r, markers, 1..4, depth - 1, true)),
            11 => FlowStmt::WhileTrue(gen_flow_suite(r, markers, 1..4, depth - 1, true)),
            12 => FlowStmt::For(gen_flow_suite(r, markers, 1..4, depth - 1, true)),
            _ => {
                let body = gen_flow_suite(r, markers, 1..3, depth - 1, in_loop);
                let handler = gen_flow_suite(r, markers, 1..3, depth - 1, in_loop);
                FlowStmt::Try(body, handler)
            }
        };
        out.push(st);
    }
    out
}

impl FlowProgram {
    pub fn source(&self) -> String {
        let mut s = String::from("def f(p):\n");
        render_flow(&self.body, 1, &mut s);
        s.push_str("    return None\n");
        s
    }

    /// Marker index -> reachable, by a syntactic walk independent of the
    /// CFG builder.
    pub fn expected_liveness(&self) -> Vec<bool> {
        let mut live = vec![false; self.markers];
        let mut loops: Vec<bool> = Vec::new();
        flow_live(&self.body, true, &mut loops, &mut live);
        live
    }
}

fn render_flow(body: &[FlowStmt], depth: usize, s: &mut String) {
    let ind = indent(depth);
    for st in body {
        match st {
            FlowStmt::Marker(k) => s.push_str(&format!("{ind}m{k} = {k}\n")),
            FlowStmt::Return => s.push_str(&format!("{ind}return p\n")),
            FlowStmt::Raise => s.push_str(&format!("{ind}raise ValueError(p)\n")),
            FlowStmt::Break => s.push_str(&format!("{ind}break\n")),
            FlowStmt::Continue => s.push_str(&format!("{ind}continue\n")),
            FlowStmt::If(then, orelse) => {
                s.push_str(&format!("{ind}if p > 1:\n"));
                render_flow(then, depth + 1, s);
                if !orelse.is_empty() {
                    s.push_str(&format!("{ind}else:\n"));
                    render_flow(orelse, depth + 1, s);
                }
            }
            FlowStmt::While(b) => {
                s.push_str(&format!("{ind}while p > 2:\n"));
                render_flow(b, depth + 1, s);
            }
            FlowStmt::WhileTrue(b) => {
                s.push_str(&format!("{ind}while True:\n"));
                render_flow(b, depth + 1, s);
            }
            FlowStmt::For(b) => {
                s.push_str(&format!("{ind}for q in p:\n"));
                render_flow(b, depth + 1, s);
            }
            FlowStmt::Try(b, h) => {
                s.push_str(&format!("{ind}try:\n"));
                render_flow(b, depth + 1, s);
                s.push_str(&format!("{ind}except ValueError:\n"));
                render_flow(h, depth + 1, s);
            }
        }
    }
}

/// Returns whether control falls through the suite.
fn flow_live(body: &[FlowStmt], mut live: bool, loops: &mut Vec<bool>, out: &mut Vec<bool>) -> bool {
    for st in body {
        match st {
            FlowStmt::Marker(k) => out[*k] = live,
            FlowStmt::Return | FlowStmt::Raise | FlowStmt::Continue => live = false,
            FlowStmt::Break => {
                if live {
                    *loops.last_mut().expect("break inside loop") = true;
                }
                live = false;
            }
            FlowStmt::If(then, orelse) => {
                let t = flow_live(then, live, loops, out);
                let e = flow_live(orelse, live, loops, out);
                live = t || e;
            }
            FlowStmt::While(b) | FlowStmt::For(b) => {
                loops.push(false);
                flow_live(b, live, loops, out);
                let brk = loops.pop().unwrap();
                live = live || brk;
            }
            FlowStmt::WhileTrue(b) => {
                loops.push(false);
                flow_live(b, live, loops, out);
                live = loops.pop().unwrap();
            }
            FlowStmt::Try(b, h) => {
                // Every statement of the try body can raise into the handler.
                let through = flow_live(b, live, loops, out);
                let handled = flow_live(h, live, loops, out);
                live = through || handled;
            }
        }
    }
    live
}

/// Reachability by breadth-first search over the raw edge list.
pub fn bfs_reachable(cfg: &Cfg) -> Vec<bool> {
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for e in &cfg.edges {
        adj.entry(e.from).or_default().push(e.to);
    }
    let mut seen = vec![false; cfg.blocks.len()];
    let mut q = VecDeque::from([cfg.entry]);
    seen[cfg.entry] = true;
    while let Some(b) = q.pop_front() {
        for &n in adj.get(&b).map(Vec::as_slice).unwrap_or(&[]) {
            if !seen[n] {
                seen[n] = true;
                q.push_back(n);
            }
        }
    }
    seen
}

/// Checks the SSA invariants: one definition per version, uses resolve to
/// a version of the operand's variable, φ-nodes only at joins.
pub fn check_ssa_invariants(ssa: &SsaProgram) -> Result<(), String> {
    let cfg = &ssa.cfg;
    let mut def_count = vec![0usize; ssa.values.len()];
    let mut seen_sites = HashSet::new();
    for (b, blk) in cfg.blocks.iter().enumerate() {
        for (i, ins) in blk.instrs.iter().enumerate() {
            if let Some(d) = ssa.defs[b][i] {
                def_count[d.index()] += 1;
                if ssa.values[d.index()].def != (DefSite::Instr { block: b, index: i }) {
                    return Err(format!("def site mismatch for {}", ssa.value_name(d)));
                }
                if Some(ssa.var_of(d)) != ins.dest {
                    return Err(format!("{} defined by an instruction writing another variable", ssa.value_name(d)));
                }
            }
            for (k, a) in ins.args.iter().enumerate() {
                match (a, ssa.uses[b][i][k]) {
                    (Operand::Var(v), Some(u)) => {
                        if ssa.var_of(u) != *v {
                            return Err(format!("use of {} resolves to {}", cfg.var_name(*v), ssa.value_name(u)));
                        }
                        if !ssa.users[u.index()].contains(&UseSite::Instr { block: b, index: i, arg: k }) {
                            return Err(format!("def-use chain of {} misses a use", ssa.value_name(u)));
                        }
                    }
                    (Operand::Const(_), None) => {}
                    (Operand::Var(v), None) if blk.unreachable => {
                        let _ = v;
                    }
                    (a, u) => return Err(format!("operand {a:?} resolved to {u:?}")),
                }
            }
        }
        for (k, phi) in ssa.phis[b].iter().enumerate() {
            def_count[phi.dest.index()] += 1;
            if !seen_sites.insert((b, k)) || ssa.values[phi.dest.index()].def != (DefSite::Phi { block: b, index: k }) {
                return Err(format!("phi def site mismatch for {}", ssa.value_name(phi.dest)));
            }
            if ssa.ssa_preds[b].len() < 2 {
                return Err(format!("phi {} at block {b} with fewer than two predecessors", ssa.value_name(phi.dest)));
            }
            for (_, v) in &phi.incoming {
                if ssa.var_of(*v) != phi.var {
                    return Err(format!("phi operand {} for another variable", ssa.value_name(*v)));
                }
            }
        }
    }
    if let Some(v) = def_count.iter().position(|&c| c != 1) {
        return Err(format!("value #{v} has {} definitions", def_count[v]));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Taint programs and the path-enumeration oracle.

#[derive(Debug, Clone)]
pub enum TaintStmt {
    Source(usize),
    Lit(usize),
    Copy(usize, usize),
    Concat(usize, usize, usize),
    FString(usize, usize),
    Percent(usize, usize),
    FormatMethod(usize, usize),
    Sanitize(usize, usize),
    Sink(usize),
    If(Vec<TaintStmt>, Vec<TaintStmt>),
    While(Vec<TaintStmt>),
}

pub const TAINT_VARS: [&str; 5] = ["a", "b", "c", "d", "e"];

pub struct TaintProgram {
    pub body: Vec<TaintStmt>,
}

pub fn gen_taint_program(r: &mut ChaCha8Rng, loops: bool) -> TaintProgram {
    TaintProgram { body: gen_taint_suite(r, 2..10, 3, loops) }
}

fn gen_taint_suite(r: &mut ChaCha8Rng, n: std::ops::Range<usize>, depth: usize, loops: bool) -> Vec<TaintStmt> {
    let n = r.gen_range(n);
    let v = |r: &mut ChaCha8Rng| r.gen_range(0..TAINT_VARS.len());
    (0..n)
        .map(|_| match r.gen_range(0..if depth > 0 { 12 } else { 10 }) {
            0 => TaintStmt::Source(v(r)),
            1 => TaintStmt::Lit(v(r)),
            2 => TaintStmt::Copy(v(r), v(r)),
            3 => TaintStmt::Concat(v(r), v(r), v(r)),
            4 => TaintStmt::FString(v(r), v(r)),
            5 => TaintStmt::Percent(v(r), v(r)),
            6 => TaintStmt::FormatMethod(v(r), v(r)),
            7 => TaintStmt::Sanitize(v(r), v(r)),
            8 | 9 => TaintStmt::Sink(v(r)),
            10 if loops && r.gen_bool(0.5) => TaintStmt::While(gen_taint_suite(r, 1..4, depth - 1, loops)),
            _ => {
                let then = gen_taint_suite(r, 1..4, depth - 1, loops);
                let orelse = gen_taint_suite(r, 0..3, depth - 1, loops);
                TaintStmt::If(then, orelse)
            }
        })
        .collect()
}

/// Oracle result: final taint per variable and the set of sink lines that
/// receive tainted data on some path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaintOutcome {
    pub final_taint: Vec<bool>,
    pub tainted_sinks: BTreeSet<u32>,
}

impl TaintProgram {
    /// Renders the program; returns the source and the line of each sink
    /// statement in pre-order.
    pub fn source(&self) -> (String, Vec<u32>) {
        let mut s = String::from("import sqlite3\ncur = sqlite3.connect(\"t.db\").cursor()\n");
        for n in TAINT_VARS {
            s.push_str(&format!("{n} = \"\"\n"));
        }
        let mut lines = Vec::new();
        render_taint(&self.body, 0, &mut s, &mut lines);
        (s, lines)
    }

    /// Enumerates execution paths. Loop-free suites fork at every branch;
    /// a loop iterates its body until the set of reachable states is
    /// closed (zero or more iterations).
    pub fn enumerate(&self) -> TaintOutcome {
        let (_, lines) = self.source();
        let mut sinks = BTreeSet::new();
        let mut cursor = 0;
        let start: BTreeSet<Vec<bool>> = [vec![false; TAINT_VARS.len()]].into();
        let end = enum_suite(&self.body, start, &lines, &mut cursor, &mut sinks);
        let mut final_taint = vec![false; TAINT_VARS.len()];
        for st in &end {
            for (f, t) in final_taint.iter_mut().zip(st) {
                *f |= *t;
            }
        }
        TaintOutcome { final_taint, tainted_sinks: sinks }
    }

    pub fn has_loop(&self) -> bool {
        fn any(b: &[TaintStmt]) -> bool {
            b.iter().any(|s| match s {
                TaintStmt::While(_) => true,
                TaintStmt::If(t, e) => any(t) || any(e),
                _ => false,
            })
        }
        any(&self.body)
    }
}

fn render_taint(body: &[TaintStmt], depth: usize, s: &mut String, sinks: &mut Vec<u32>) {
    let ind = indent(depth);
    let n = |v: &usize| TAINT_VARS[*v];
    for st in body {
        let line = match st {
            TaintStmt::Source(x) => format!("{} = input()", n(x)),
            TaintStmt::Lit(x) => format!("{} = \"k\"", n(x)),
            TaintStmt::Copy(x, y) => format!("{} = {}", n(x), n(y)),
            TaintStmt::Concat(x, y, z) => format!("{} = {} + {}", n(x), n(y), n(z)),
            TaintStmt::FString(x, y) => format!("{} = f\"id = {{{}}}\"", n(x), n(y)),
            TaintStmt::Percent(x, y) => format!("{} = \"id = %s\" % {}", n(x), n(y)),
            TaintStmt::FormatMethod(x, y) => format!("{} = \"id = {{}}\".format({})", n(x), n(y)),
            TaintStmt::Sanitize(x, y) => format!("{} = int({})", n(x), n(y)),
            TaintStmt::Sink(x) => {
                sinks.push(s.lines().count() as u32 + 1);
                format!("cur.execute({})", n(x))
            }
            TaintStmt::If(then, orelse) => {
                s.push_str(&format!("{ind}if flag:\n"));
                render_taint(then, depth + 1, s, sinks);
                if !orelse.is_empty() {
                    s.push_str(&format!("{ind}else:\n"));
                    render_taint(orelse, depth + 1, s, sinks);
                }
                continue;
            }
            TaintStmt::While(b) => {
                s.push_str(&format!("{ind}while flag:\n"));
                render_taint(b, depth + 1, s, sinks);
                continue;
            }
        };
        s.push_str(&format!("{ind}{line}\n"));
    }
}

fn enum_suite(
    body: &[TaintStmt],
    mut states: BTreeSet<Vec<bool>>,
    lines: &[u32],
    cursor: &mut usize,
    sinks: &mut BTreeSet<u32>,
) -> BTreeSet<Vec<bool>> {
    for st in body {
        let map = |states: &BTreeSet<Vec<bool>>, f: &dyn Fn(&mut Vec<bool>)| {
            states
                .iter()
                .map(|s| {
                    let mut s = s.clone();
                    f(&mut s);
                    s
                })
                .collect::<BTreeSet<_>>()
        };
        states = match st {
            TaintStmt::Source(x) => map(&states, &|s| s[*x] = true),
            TaintStmt::Lit(x) => map(&states, &|s| s[*x] = false),
            TaintStmt::Sanitize(x, _) => map(&states, &|s| s[*x] = false),
            TaintStmt::Copy(x, y)
            | TaintStmt::FString(x, y)
            | TaintStmt::Percent(x, y)
            | TaintStmt::FormatMethod(x, y) => map(&states, &|s| s[*x] = s[*y]),
            TaintStmt::Concat(x, y, z) => map(&states, &|s| s[*x] = s[*y] || s[*z]),
            TaintStmt::Sink(x) => {
                let line = lines[*cursor];
                *cursor += 1;
                if states.iter().any(|s| s[*x]) {
                    sinks.insert(line);
                }
                states
            }
            TaintStmt::If(then, orelse) => {
                let mut t = enum_suite(then, states.clone(), lines, cursor, sinks);
                let e = enum_suite(orelse, states, lines, cursor, sinks);
                t.extend(e);
                t
            }
            TaintStmt::While(b) => {
                let start = *cursor;
                let mut all = states.clone();
                loop {
                    *cursor = start;
                    let next = enum_suite(b, all.clone(), lines, cursor, sinks);
                    let before = all.len();
                    all.extend(next);
                    if all.len() == before {
                        break;
                    }
                }
                all
            }
        };
    }
    states
}
