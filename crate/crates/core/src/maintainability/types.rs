//! Shallow, flow-sensitive type inference over SSA: literals, casts,
//! declared annotations and operator result types. Everything else is
//! `Unknown`, and unknown types never produce findings.

use crate::frontend::ast::{BinOp, CmpOp, Constant, Expr, ExprKind, ParamKind, UnaryOp};
use crate::frontend::ir::*;
use crate::frontend::ssa::{SsaProgram, ValueId};
use crate::taint::program::CallGraph;
use serde::Serialize;
use std::collections::HashMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Ty {
    Int,
    Float,
    Str,
    Bool,
    None,
    List,
    Dict,
    Tuple,
    Unknown,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ty::Int => "int",
            Ty::Float => "float",
            Ty::Str => "str",
            Ty::Bool => "bool",
            Ty::None => "None",
            Ty::List => "list",
            Ty::Dict => "dict",
            Ty::Tuple => "tuple",
            Ty::Unknown => "unknown",
        })
    }
}

impl Ty {
    pub fn is_known(self) -> bool {
        self != Ty::Unknown
    }

    fn is_numeric(self) -> bool {
        matches!(self, Ty::Int | Ty::Float | Ty::Bool)
    }

    fn of_const(c: &Constant) -> Ty {
        match c {
            Constant::Int(_) | Constant::BigInt(_) => Ty::Int,
            Constant::Float(_) => Ty::Float,
            Constant::Str(_) => Ty::Str,
            Constant::Bool(_) => Ty::Bool,
            Constant::None => Ty::None,
            Constant::Bytes(_) | Constant::Complex(_) | Constant::Ellipsis => Ty::Unknown,
        }
    }

    /// `true` when a value of type `self` may be used where `other` is
    /// expected (`bool` ⊂ `int` ⊂ `float`).
    pub fn fits(self, other: Ty) -> bool {
        self == other || matches!((self, other), (Ty::Bool, Ty::Int) | (Ty::Bool, Ty::Float) | (Ty::Int, Ty::Float))
    }
}

/// A declared annotation, reduced to the lattice: the modeled alternatives
/// plus flags for `Any`/`object` and for alternatives we do not model
/// (user classes, unsupported generics).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Declared {
    pub alts: Vec<Ty>,
    pub any: bool,
    pub opaque: bool,
}

impl Declared {
    fn one(t: Ty) -> Declared {
        Declared { alts: vec![t], ..Declared::default() }
    }

    fn named(n: &str) -> Declared {
        match simple_type(n) {
            Some(t) => Declared::one(t),
            None if n == "Any" || n == "object" => Declared { any: true, ..Declared::default() },
            None => Declared { opaque: true, ..Declared::default() },
        }
    }

    pub fn from_annotation(e: &Expr) -> Declared {
        match &e.kind {
            ExprKind::Constant(Constant::None) => Declared::one(Ty::None),
            ExprKind::Name(n) | ExprKind::Attribute { attr: n, .. } => Declared::named(n),
            ExprKind::Subscript { value, index } => {
                let head = value.dotted_name().unwrap_or_default();
                match head.rsplit('.').next().unwrap_or("") {
                    "Optional" => Declared::from_annotation(index).union(Declared::one(Ty::None)),
                    "Union" => match &index.kind {
                        ExprKind::Tuple(items) => {
                            items.iter().map(Declared::from_annotation).fold(Declared::default(), Declared::union)
                        }
                        _ => Declared::from_annotation(index),
                    },
                    other => Declared::named(other),
                }
            }
            ExprKind::BinOp { left, op: BinOp::BitOr, right } => {
                Declared::from_annotation(left).union(Declared::from_annotation(right))
            }
            _ => Declared { opaque: true, ..Declared::default() },
        }
    }

    fn union(mut self, other: Declared) -> Declared {
        for t in other.alts {
            if !self.alts.contains(&t) {
                self.alts.push(t);
            }
        }
        self.any |= other.any;
        self.opaque |= other.opaque;
        self
    }

    /// A known value type that no alternative accepts.
    pub fn rejects(&self, t: Ty) -> bool {
        !self.any && !self.opaque && t.is_known() && !self.alts.iter().any(|a| t.fits(*a))
    }

    /// Falling off the end (an implicit `None`) is allowed.
    pub fn accepts_none(&self) -> bool {
        self.any || self.alts.contains(&Ty::None)
    }

    /// The single lattice type this annotation pins a value to.
    pub fn exact(&self) -> Ty {
        match self.alts.as_slice() {
            [t] if !self.any && !self.opaque => *t,
            _ => Ty::Unknown,
        }
    }
}

impl fmt::Display for Declared {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.alts.iter().map(|t| t.to_string()).collect();
        if self.opaque {
            parts.push("<class>".into());
        }
        if self.any {
            parts.push("Any".into());
        }
        f.write_str(&parts.join(" | "))
    }
}

fn simple_type(name: &str) -> Option<Ty> {
    Some(match name {
        "int" => Ty::Int,
        "float" => Ty::Float,
        "str" => Ty::Str,
        "bool" => Ty::Bool,
        "None" | "NoneType" => Ty::None,
        "list" | "List" => Ty::List,
        "dict" | "Dict" => Ty::Dict,
        "tuple" | "Tuple" => Ty::Tuple,
        _ => return None,
    })
}

/// Declared parameter and return types of one function scope.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct Signature {
    pub params: Vec<Option<Declared>>,
    pub returns: Option<Declared>,
}

impl Signature {
    pub fn of(cfg: &Cfg) -> Signature {
        Signature {
            params: cfg.params.iter().map(|p| p.annotation.as_ref().map(Declared::from_annotation)).collect(),
            returns: cfg.returns.as_ref().map(Declared::from_annotation),
        }
    }
}

/// Inferred types of one scope, plus the declarations that constrain it.
#[derive(Debug, Clone)]
pub struct TypeEnv {
    pub values: Vec<Ty>,
    /// Annotated local variables.
    pub declared: HashMap<VarId, Declared>,
    pub signature: Signature,
}

impl TypeEnv {
    pub fn ty(&self, v: ValueId) -> Ty {
        self.values[v.index()]
    }

    pub fn operand(&self, ssa: &SsaProgram, block: BlockId, index: usize, k: usize) -> Ty {
        match (&ssa.cfg.blocks[block].instrs[index].args[k], ssa.uses[block][index][k]) {
            (Operand::Const(c), _) => Ty::of_const(c),
            (_, Some(v)) => self.ty(v),
            _ => Ty::Unknown,
        }
    }
}

/// Lattice used during inference: `Bottom` (no information yet) below the
/// concrete types, `Ty::Unknown` on top.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cell {
    Bottom,
    Ty(Ty),
}

fn join(a: Cell, b: Cell) -> Cell {
    match (a, b) {
        (Cell::Bottom, x) | (x, Cell::Bottom) => x,
        (Cell::Ty(x), Cell::Ty(y)) if x == y => Cell::Ty(x),
        _ => Cell::Ty(Ty::Unknown),
    }
}

/// Result type of a binary operator, or `Err` when both operand types are
/// known and the operator does not apply to them.
pub fn binop_type(op: BinOp, l: Ty, r: Ty) -> Result<Ty, ()> {
    use Ty::*;
    // True division by or of a builtin number yields a float.
    if op == BinOp::Div && (l.is_numeric() || r.is_numeric()) && !(l.is_known() && r.is_known()) {
        return Ok(Float);
    }
    if !l.is_known() || !r.is_known() {
        return Ok(Unknown);
    }
    let numeric = l.is_numeric() && r.is_numeric();
    let widest = if l == Float || r == Float { Float } else { Int };
    match op {
        BinOp::Add => match (l, r) {
            _ if numeric => Ok(widest),
            (Str, Str) => Ok(Str),
            (List, List) => Ok(List),
            (Tuple, Tuple) => Ok(Tuple),
            _ => Err(()),
        },
        BinOp::Sub | BinOp::FloorDiv => if numeric { Ok(widest) } else { Err(()) },
        BinOp::Div => if numeric { Ok(Float) } else { Err(()) },
        BinOp::Pow => if numeric { Ok(Unknown) } else { Err(()) },
        BinOp::Mult => match (l, r) {
            _ if numeric => Ok(widest),
            (Str | List | Tuple, Int | Bool) => Ok(l),
            (Int | Bool, Str | List | Tuple) => Ok(r),
            _ => Err(()),
        },
        BinOp::Mod => match l {
            Str => Ok(Str),
            _ if numeric => Ok(widest),
            _ => Err(()),
        },
        BinOp::LShift | BinOp::RShift | BinOp::BitAnd | BinOp::BitXor | BinOp::BitOr => match (l, r) {
            (Int | Bool, Int | Bool) => Ok(if l == Bool && r == Bool && op != BinOp::LShift && op != BinOp::RShift { Bool } else { Int }),
            (Dict, Dict) if op == BinOp::BitOr => Ok(Dict),
            _ => Err(()),
        },
        BinOp::MatMult => Ok(Unknown),
    }
}

pub fn unary_type(op: UnaryOp, t: Ty) -> Result<Ty, ()> {
    match (op, t) {
        (UnaryOp::Not, _) => Ok(Ty::Bool),
        (_, Ty::Unknown) => Ok(Ty::Unknown),
        (UnaryOp::Neg | UnaryOp::Pos, Ty::Int | Ty::Bool) => Ok(Ty::Int),
        (UnaryOp::Neg | UnaryOp::Pos, Ty::Float) => Ok(Ty::Float),
        (UnaryOp::Invert, Ty::Int | Ty::Bool) => Ok(Ty::Int),
        _ => Err(()),
    }
}

/// An ordering comparison between known types that do not support it.
pub fn ordering_mismatch(op: CmpOp, l: Ty, r: Ty) -> bool {
    if !matches!(op, CmpOp::Lt | CmpOp::LtE | CmpOp::Gt | CmpOp::GtE) || !l.is_known() || !r.is_known() {
        return false;
    }
    let orderable = (l.is_numeric() && r.is_numeric()) || (l == r && matches!(l, Ty::Str | Ty::List | Ty::Tuple));
    !orderable
}

pub fn unary_symbol(op: UnaryOp) -> &'static str {
    match op {
        UnaryOp::Not => "not",
        UnaryOp::Neg => "-",
        UnaryOp::Pos => "+",
        UnaryOp::Invert => "~",
    }
}

pub fn cmp_symbol(op: CmpOp) -> &'static str {
    match op {
        CmpOp::Eq => "==",
        CmpOp::NotEq => "!=",
        CmpOp::Lt => "<",
        CmpOp::LtE => "<=",
        CmpOp::Gt => ">",
        CmpOp::GtE => ">=",
        _ => "in",
    }
}

fn builtin_call(name: &str) -> Option<Ty> {
    Some(match name {
        "int" | "len" | "ord" => Ty::Int,
        "float" => Ty::Float,
        "str" | "repr" | "input" | "chr" | "hex" | "oct" | "bin" | "ascii" => Ty::Str,
        "bool" | "isinstance" | "callable" | "hasattr" => Ty::Bool,
        "list" | "sorted" => Ty::List,
        "dict" => Ty::Dict,
        "tuple" => Ty::Tuple,
        _ => return None,
    })
}

fn str_method(name: &str) -> Option<Ty> {
    Some(match name {
        "upper" | "lower" | "strip" | "lstrip" | "rstrip" | "replace" | "join" | "format" | "title" | "capitalize"
        | "casefold" | "swapcase" | "center" | "ljust" | "rjust" | "zfill" | "removeprefix" | "removesuffix" => Ty::Str,
        "split" | "rsplit" | "splitlines" => Ty::List,
        "startswith" | "endswith" | "isdigit" | "isalpha" | "isalnum" | "isspace" | "isupper" | "islower"
        | "isnumeric" | "isdecimal" | "isidentifier" => Ty::Bool,
        "find" | "rfind" | "count" | "index" | "rindex" => Ty::Int,
        _ => return None,
    })
}

/// Infers a [`TypeEnv`] for scope `scope`. `sigs` holds the signature of
/// every scope, used for calls resolved by `graph`.
pub fn infer(ssa: &[SsaProgram], scope: ScopeId, sigs: &[Signature], graph: &CallGraph) -> TypeEnv {
    let prog = &ssa[scope];
    let cfg = &prog.cfg;
    let signature = sigs[scope].clone();
    let declared: HashMap<VarId, Declared> =
        cfg.declarations.iter().map(|d| (d.var, Declared::from_annotation(&d.annotation))).collect();
    let mut cells = vec![Cell::Bottom; prog.values.len()];
    let ty_of = |cells: &[Cell], b: BlockId, i: usize, k: usize| -> Ty {
        match (&cfg.blocks[b].instrs[i].args[k], prog.uses[b][i][k]) {
            (Operand::Const(c), _) => Ty::of_const(c),
            (_, Some(v)) => match cells[v.index()] {
                Cell::Bottom => Ty::Unknown,
                Cell::Ty(t) => t,
            },
            _ => Ty::Unknown,
        }
    };
    loop {
        let mut changed = false;
        for b in 0..cfg.blocks.len() {
            for phi in &prog.phis[b] {
                let joined = phi.incoming.iter().fold(Cell::Bottom, |acc, (_, v)| join(acc, cells[v.index()]));
                let new = join(cells[phi.dest.index()], joined);
                if new != cells[phi.dest.index()] {
                    cells[phi.dest.index()] = new;
                    changed = true;
                }
            }
            for (i, ins) in cfg.blocks[b].instrs.iter().enumerate() {
                let Some(d) = prog.defs[b][i] else { continue };
                let t = |k: usize| ty_of(&cells, b, i, k);
                let cell = match &ins.op {
                    Op::Entry(EntryKind::Undefined) => Cell::Bottom,
                    Op::Param(k) => Cell::Ty(match cfg.params.get(*k).map(|p| p.kind) {
                        Some(ParamKind::VarArgs) => Ty::Tuple,
                        Some(ParamKind::KwArgs) => Ty::Dict,
                        _ => signature.params.get(*k).and_then(|d| d.as_ref()).map(Declared::exact).unwrap_or(Ty::Unknown),
                    }),
                    _ => Cell::Ty(instr_type(prog, b, i, &t, graph, sigs)),
                };
                // Annotated variables keep their declared type.
                let cell = match (declared.get(&ins.dest.unwrap_or(usize::MAX)), &ins.op) {
                    (Some(decl), op) if !matches!(op, Op::Entry(_)) && decl.exact().is_known() => Cell::Ty(decl.exact()),
                    _ => cell,
                };
                let new = join(cells[d.index()], cell);
                if new != cells[d.index()] {
                    cells[d.index()] = new;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let values = cells
        .into_iter()
        .map(|c| match c {
            Cell::Bottom => Ty::Unknown,
            Cell::Ty(t) => t,
        })
        .collect();
    TypeEnv { values, declared, signature }
}

/// Type of the value instruction `(b, i)` computes, before any declared
/// annotation on its destination applies. `t(k)` types operand `k`.
pub(crate) fn instr_type(
    prog: &SsaProgram,
    b: BlockId,
    i: usize,
    t: &dyn Fn(usize) -> Ty,
    graph: &CallGraph,
    sigs: &[Signature],
) -> Ty {
    let ins = &prog.cfg.blocks[b].instrs[i];
    let scope = prog.cfg.id;
    match &ins.op {
        Op::Copy => t(0),
        Op::BinOp(op) => binop_type(*op, t(0), t(1)).unwrap_or(Ty::Unknown),
        Op::UnaryOp(op) => unary_type(*op, t(0)).unwrap_or(Ty::Unknown),
        Op::Compare(_) => Ty::Bool,
        Op::BoolOp(_) => {
            let first = t(0);
            if (1..ins.args.len()).all(|k| t(k) == first) {
                first
            } else {
                Ty::Unknown
            }
        }
        Op::IfExp => {
            if t(1) == t(2) {
                t(1)
            } else {
                Ty::Unknown
            }
        }
        Op::Format { .. } => Ty::Str,
        Op::Build(BuildKind::Tuple) => Ty::Tuple,
        Op::Build(BuildKind::List) => Ty::List,
        Op::Build(BuildKind::Dict) => Ty::Dict,
        Op::GetItem if t(0) == Ty::Str => Ty::Str,
        Op::IterNext => {
            let from_range = prog.uses[b][i][0]
                .and_then(|v| prog.def_instr(v))
                .is_some_and(|d| matches!(&d.op, Op::Call(ci) if ci.path.as_deref() == Some("range")));
            match t(0) {
                _ if from_range => Ty::Int,
                Ty::Str => Ty::Str,
                _ => Ty::Unknown,
            }
        }
        Op::Mutate(_) | Op::StoreAttr(_) | Op::StoreItem => t(0),
        Op::Call(ci) => {
            let bindings = graph.bindings(scope, b, i);
            if !bindings.is_empty() {
                let rets: Vec<Ty> = bindings
                    .iter()
                    .map(|bd| {
                        if !bd.returns {
                            return Ty::Unknown;
                        }
                        sigs[bd.callee].returns.as_ref().map(Declared::exact).unwrap_or(Ty::Unknown)
                    })
                    .collect();
                return if rets.iter().all(|r| *r == rets[0]) { rets[0] } else { Ty::Unknown };
            }
            if ci.has_receiver {
                let method = ci.last_segment().unwrap_or("");
                return match t(0) {
                    Ty::Str => str_method(method).unwrap_or(Ty::Unknown),
                    Ty::List if matches!(method, "count" | "index") => Ty::Int,
                    _ => Ty::Unknown,
                };
            }
            match ci.path.as_deref() {
                // round(x) is an int; round(x, n) keeps the type of x.
                Some("round") if ci.positional == 1 && ins.args.len() == 1 => Ty::Int,
                Some("round") if ci.positional == 2 && matches!(t(0), Ty::Int | Ty::Float) => t(0),
                Some("abs") if matches!(t(0), Ty::Int | Ty::Float) => t(0),
                path => path.and_then(builtin_call).unwrap_or(Ty::Unknown),
            }
        }
        _ => Ty::Unknown,
    }
}
