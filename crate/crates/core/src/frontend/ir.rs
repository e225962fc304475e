//! Three-address IR and control-flow graphs.
//!
//! Each scope (module top level, function, method, class body) gets its own
//! [`Cfg`]. Expressions are flattened into [`Instr`]s over named variables;
//! nested sub-expressions get `$t` temporaries.

use super::ast::{BinOp, BoolOp, CmpOp, Constant, Expr, ParamKind, Span, UnaryOp};
use serde::Serialize;
use std::fmt;

pub type BlockId = usize;
pub type VarId = usize;
pub type ScopeId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeLabel {
    Fallthrough,
    BranchTrue,
    BranchFalse,
    LoopBack,
    Exception,
}

impl fmt::Display for EdgeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EdgeLabel::Fallthrough => "fallthrough",
            EdgeLabel::BranchTrue => "branch-true",
            EdgeLabel::BranchFalse => "branch-false",
            EdgeLabel::LoopBack => "loop-back",
            EdgeLabel::Exception => "exception",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub from: BlockId,
    pub to: BlockId,
    pub label: EdgeLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Operand {
    Var(VarId),
    Const(Constant),
}

impl Operand {
    pub fn var(&self) -> Option<VarId> {
        match self {
            Operand::Var(v) => Some(*v),
            Operand::Const(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormatKind {
    FString,
    Percent,
    FormatMethod,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallInfo {
    /// Dotted callee path with import aliases resolved, e.g. `subprocess.run`
    /// or `sqlite3.connect().cursor`. `None` when the callee is not a name chain.
    pub path: Option<String>,
    /// When true, `args[0]` is the receiver (`obj` in `obj.m(...)`).
    pub has_receiver: bool,
    /// Number of positional arguments (after the receiver, if any).
    pub positional: usize,
    /// Keyword names of the trailing operands; `None` for `**mapping`.
    pub keywords: Vec<Option<String>>,
    /// Positional indices that were `*iterable` unpackings.
    pub starred: Vec<usize>,
}

impl CallInfo {
    /// Operand index of the `i`-th positional argument.
    pub fn positional_operand(&self, i: usize) -> usize {
        i + usize::from(self.has_receiver)
    }

    pub fn keyword_operand(&self, k: usize) -> usize {
        self.positional + usize::from(self.has_receiver) + k
    }

    pub fn last_segment(&self) -> Option<&str> {
        self.path.as_deref().map(|p| p.rsplit('.').next().unwrap_or(p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BindKind {
    ExceptAs,
    WithAs,
    MatchCapture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildKind {
    Tuple,
    List,
    Set,
    Dict,
    Generator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryKind {
    /// Local variable before its first assignment.
    Undefined,
    /// Name resolved in an enclosing scope (global, closure, builtin).
    Free,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Op {
    Copy,
    BinOp(BinOp),
    UnaryOp(UnaryOp),
    Compare(Vec<CmpOp>),
    BoolOp(BoolOp),
    /// args: test, body, orelse
    IfExp,
    Call(CallInfo),
    /// String building; `literal` is the concatenation of the literal parts.
    Format { kind: FormatKind, literal: String },
    GetAttr { attr: String, path: Option<String> },
    GetItem,
    Slice,
    Build(BuildKind),
    UnpackItem(usize),
    UnpackStar,
    /// `for` loop element: dest = next(args[0]).
    IterNext,
    /// `for` loop header test on the iterator.
    IterTest,
    Import(String),
    MakeFunction(ScopeId),
    MakeClass(ScopeId),
    /// Lambda value; args are the free variables its body reads.
    MakeLambda,
    Param(usize),
    Entry(EntryKind),
    /// Field-insensitive store: dest (the base variable) = base with attr set.
    StoreAttr(String),
    StoreItem,
    /// Side effect of a method call on a variable: dest = receiver.
    Mutate(String),
    Bind(BindKind),
    Delete,
    Return,
    Raise,
    /// Branch condition of `if` / `while` / `match`.
    Test,
    Assert,
    /// Expression statement whose value is discarded.
    Eval,
    Nop,
    Unknown(&'static str),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instr {
    pub dest: Option<VarId>,
    pub op: Op,
    pub args: Vec<Operand>,
    pub span: Span,
    /// Not written by the user (entry definitions, method side effects).
    pub synthetic: bool,
}

impl Instr {
    pub fn is_terminator_like(&self) -> bool {
        matches!(self.op, Op::Return | Op::Raise)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Local,
    /// Compiler temporary.
    Temp,
    /// Declared `global`/`nonlocal`, or read but never assigned here.
    Free,
    /// Comprehension variable (scoped to its comprehension).
    Comprehension,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarInfo {
    pub name: String,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Block {
    pub instrs: Vec<Instr>,
    /// No path from entry reaches this block.
    pub unreachable: bool,
    /// Start of a dead region; carries its own entry definitions.
    pub region_root: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScopeKind {
    Module,
    Function,
    Method,
    Class,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamInfo {
    pub name: String,
    pub var: VarId,
    pub annotation: Option<Expr>,
    pub has_default: bool,
    pub kind: ParamKind,
    pub span: Span,
}

/// An annotated variable (`x: int` or `x: int = v`).
#[derive(Debug, Clone, PartialEq)]
pub struct Declaration {
    pub var: VarId,
    pub annotation: Expr,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cfg {
    pub id: ScopeId,
    pub name: String,
    pub qualname: String,
    pub kind: ScopeKind,
    pub parent: Option<ScopeId>,
    pub span: Span,
    pub params: Vec<ParamInfo>,
    pub returns: Option<Expr>,
    pub decorators: Vec<Expr>,
    pub is_async: bool,
    pub vars: Vec<VarInfo>,
    pub blocks: Vec<Block>,
    pub edges: Vec<Edge>,
    pub entry: BlockId,
    pub exit: BlockId,
    /// Block ending the body; its fallthrough into `exit` is the implicit
    /// `return None` at the end of a function.
    pub body_end: BlockId,
    pub declarations: Vec<Declaration>,
    pub lines: std::sync::Arc<Vec<String>>,
}

impl Cfg {
    pub fn line_text(&self, line: u32) -> &str {
        super::ast::line_text(&self.lines, line)
    }

    pub fn var_name(&self, v: VarId) -> &str {
        &self.vars[v].name
    }

    pub fn var_id(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn succs(&self, b: BlockId) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.from == b)
    }

    pub fn preds(&self, b: BlockId) -> impl Iterator<Item = &Edge> {
        self.edges.iter().filter(move |e| e.to == b)
    }

    /// Body blocks: everything but entry and exit.
    pub fn body_blocks(&self) -> impl Iterator<Item = BlockId> + '_ {
        (0..self.blocks.len()).filter(move |&b| b != self.entry && b != self.exit)
    }

    /// Breadth-first reachability from entry over all edges.
    pub fn reachable_from_entry(&self) -> Vec<bool> {
        let mut seen = vec![false; self.blocks.len()];
        let mut queue = std::collections::VecDeque::from([self.entry]);
        seen[self.entry] = true;
        while let Some(b) = queue.pop_front() {
            for e in self.succs(b) {
                if !seen[e.to] {
                    seen[e.to] = true;
                    queue.push_back(e.to);
                }
            }
        }
        seen
    }

    pub fn is_function_like(&self) -> bool {
        matches!(self.kind, ScopeKind::Function | ScopeKind::Method)
    }

    pub fn render_operand(&self, o: &Operand) -> String {
        match o {
            Operand::Var(v) => self.var_name(*v).to_string(),
            Operand::Const(c) => render_const(c),
        }
    }

    /// Renders an instruction with operands formatted by `name`.
    pub fn render_instr_with(&self, ins: &Instr, dest: Option<String>, args: &[String]) -> String {
        let rhs = render_rhs(&ins.op, args);
        match dest {
            Some(d) => format!("{d} = {rhs}"),
            None => rhs,
        }
    }

    pub fn render_instr(&self, ins: &Instr) -> String {
        let args: Vec<String> = ins.args.iter().map(|a| self.render_operand(a)).collect();
        self.render_instr_with(ins, ins.dest.map(|d| self.var_name(d).to_string()), &args)
    }
}

pub fn render_const(c: &Constant) -> String {
    match c {
        Constant::Int(i) => i.to_string(),
        Constant::BigInt(s) | Constant::Complex(s) => s.clone(),
        Constant::Float(f) => format!("{f:?}"),
        Constant::Str(s) => format!("{s:?}"),
        Constant::Bytes(s) => format!("b{s:?}"),
        Constant::Bool(b) => if *b { "True" } else { "False" }.to_string(),
        Constant::None => "None".into(),
        Constant::Ellipsis => "...".into(),
    }
}

fn render_rhs(op: &Op, a: &[String]) -> String {
    let list = |xs: &[String]| xs.join(", ");
    match op {
        Op::Copy => a.first().cloned().unwrap_or_default(),
        Op::BinOp(b) => format!("{} {} {}", a[0], b.symbol(), a[1]),
        Op::UnaryOp(u) => {
            let s = match u {
                UnaryOp::Not => "not ",
                UnaryOp::Neg => "-",
                UnaryOp::Pos => "+",
                UnaryOp::Invert => "~",
            };
            format!("{s}{}", a[0])
        }
        Op::Compare(ops) => format!("compare[{}]({})", ops.len(), list(a)),
        Op::BoolOp(b) => format!("{}({})", if *b == BoolOp::And { "and" } else { "or" }, list(a)),
        Op::IfExp => format!("ifexp({})", list(a)),
        Op::Call(ci) => {
            let callee = ci.path.clone().unwrap_or_else(|| "<callee>".into());
            let mut parts: Vec<String> = Vec::new();
            let skip = usize::from(ci.has_receiver);
            let recv = if ci.has_receiver { format!("[{}] ", a[0]) } else { String::new() };
            for (i, s) in a.iter().enumerate().skip(skip) {
                let k = i - skip;
                if k < ci.positional {
                    if ci.starred.contains(&k) {
                        parts.push(format!("*{s}"));
                    } else {
                        parts.push(s.clone());
                    }
                } else {
                    match &ci.keywords[k - ci.positional] {
                        Some(n) => parts.push(format!("{n}={s}")),
                        None => parts.push(format!("**{s}")),
                    }
                }
            }
            format!("call {recv}{callee}({})", parts.join(", "))
        }
        Op::Format { kind, literal } => {
            let k = match kind {
                FormatKind::FString => "fstring",
                FormatKind::Percent => "percent",
                FormatKind::FormatMethod => "format",
            };
            format!("{k}({:?}; {})", literal, list(a))
        }
        Op::GetAttr { attr, .. } => format!("{}.{attr}", a[0]),
        Op::GetItem => format!("{}[{}]", a[0], a[1]),
        Op::Slice => format!("slice({})", list(a)),
        Op::Build(k) => match k {
            BuildKind::Tuple => format!("({})", list(a)),
            BuildKind::List => format!("[{}]", list(a)),
            BuildKind::Set => format!("{{{}}}", list(a)),
            BuildKind::Dict => format!("dict({})", list(a)),
            BuildKind::Generator => format!("gen({})", list(a)),
        },
        Op::UnpackItem(i) => format!("unpack[{i}]({})", a[0]),
        Op::UnpackStar => format!("unpack[*]({})", a[0]),
        Op::IterNext => format!("next({})", a[0]),
        Op::IterTest => format!("iter-test {}", a[0]),
        Op::Import(p) => format!("import {p}"),
        Op::MakeFunction(s) => format!("function #{s}({})", list(a)),
        Op::MakeClass(s) => format!("class #{s}({})", list(a)),
        Op::MakeLambda => format!("lambda({})", list(a)),
        Op::Param(i) => format!("param #{i}"),
        Op::Entry(EntryKind::Undefined) => "<undefined>".into(),
        Op::Entry(EntryKind::Free) => "<free>".into(),
        Op::StoreAttr(attr) => format!("store-attr[{attr}]({})", list(a)),
        Op::StoreItem => format!("store-item({})", list(a)),
        Op::Mutate(m) => format!("mutate[{m}]({})", list(a)),
        Op::Bind(k) => format!("bind-{k:?}({})", list(a)).to_lowercase(),
        Op::Delete => "del".into(),
        Op::Return => format!("return {}", list(a)).trim_end().to_string(),
        Op::Raise => format!("raise {}", list(a)).trim_end().to_string(),
        Op::Test => format!("test {}", list(a)),
        Op::Assert => format!("assert {}", list(a)),
        Op::Eval => format!("eval {}", list(a)),
        Op::Nop => "pass".into(),
        Op::Unknown(w) => format!("unknown[{w}]({})", list(a)),
    }
}
