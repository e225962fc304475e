//! Syntax tree for the analyzed scripting language (a Python subset).
//!
//! Every node carries a [`Span`]. Constructs outside the supported core
//! (match statements, `yield`, `await`) are kept as opaque `Unknown` nodes
//! that retain their sub-expressions so downstream analyses can treat them
//! conservatively.

use serde::{Deserialize, Serialize};
use std::fmt;

/// 1-based source position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl Span {
    pub fn new(line: u32, col: u32) -> Self {
        Span { line, col }
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Module {
    pub body: Vec<Stmt>,
    /// Source lines, for rendering evidence.
    pub lines: std::sync::Arc<Vec<String>>,
}

impl Module {
    /// Trimmed text of a 1-based source line (empty when out of range).
    pub fn line_text(&self, line: u32) -> &str {
        line_text(&self.lines, line)
    }
}

pub fn line_text(lines: &[String], line: u32) -> &str {
    (line as usize).checked_sub(1).and_then(|i| lines.get(i)).map(|l| l.trim()).unwrap_or("")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StmtKind {
    Expr(Expr),
    Assign {
        targets: Vec<Expr>,
        value: Expr,
    },
    AugAssign {
        target: Expr,
        op: BinOp,
        value: Expr,
    },
    AnnAssign {
        target: Expr,
        annotation: Expr,
        value: Option<Expr>,
    },
    If {
        test: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    While {
        test: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
    },
    For {
        target: Expr,
        iter: Expr,
        body: Vec<Stmt>,
        orelse: Vec<Stmt>,
        is_async: bool,
    },
    FunctionDef(Box<FunctionDef>),
    ClassDef(Box<ClassDef>),
    Return(Option<Expr>),
    Raise {
        exc: Option<Expr>,
        cause: Option<Expr>,
    },
    Break,
    Continue,
    Pass,
    Try {
        body: Vec<Stmt>,
        handlers: Vec<ExceptHandler>,
        orelse: Vec<Stmt>,
        finalbody: Vec<Stmt>,
    },
    With {
        items: Vec<WithItem>,
        body: Vec<Stmt>,
        is_async: bool,
    },
    Import(Vec<Alias>),
    ImportFrom {
        module: Option<String>,
        names: Vec<Alias>,
        level: u32,
    },
    Global(Vec<String>),
    Nonlocal(Vec<String>),
    Assert {
        test: Expr,
        msg: Option<Expr>,
    },
    Delete(Vec<Expr>),
    /// Opaque statement (currently `match`): the scrutinee expressions, the
    /// names its patterns bind, and the nested bodies.
    Unknown {
        reads: Vec<Expr>,
        binds: Vec<String>,
        bodies: Vec<Vec<Stmt>>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionDef {
    pub name: String,
    pub params: Vec<Param>,
    pub returns: Option<Expr>,
    pub body: Vec<Stmt>,
    pub decorators: Vec<Expr>,
    pub is_async: bool,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassDef {
    pub name: String,
    pub bases: Vec<Expr>,
    pub keywords: Vec<Keyword>,
    pub body: Vec<Stmt>,
    pub decorators: Vec<Expr>,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Ordinary positional-or-keyword (or positional-only / keyword-only).
    Normal,
    VarArgs,
    KwArgs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub annotation: Option<Expr>,
    pub default: Option<Expr>,
    pub kind: ParamKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExceptHandler {
    pub ty: Option<Expr>,
    pub name: Option<String>,
    pub body: Vec<Stmt>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WithItem {
    pub context: Expr,
    pub target: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alias {
    pub name: String,
    pub asname: Option<String>,
    pub span: Span,
}

impl Alias {
    /// The local name this import binds.
    pub fn bound_name(&self) -> &str {
        match &self.asname {
            Some(a) => a,
            None => self.name.split('.').next().unwrap_or(&self.name),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Keyword {
    /// `None` for `**mapping`.
    pub arg: Option<String>,
    pub value: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constant {
    Int(i64),
    /// Integer literal too large for `i64`; keeps its source text.
    BigInt(String),
    Float(f64),
    Complex(String),
    Str(String),
    Bytes(String),
    Bool(bool),
    None,
    Ellipsis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mult,
    MatMult,
    Div,
    FloorDiv,
    Mod,
    Pow,
    LShift,
    RShift,
    BitOr,
    BitXor,
    BitAnd,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mult => "*",
            BinOp::MatMult => "@",
            BinOp::Div => "/",
            BinOp::FloorDiv => "//",
            BinOp::Mod => "%",
            BinOp::Pow => "**",
            BinOp::LShift => "<<",
            BinOp::RShift => ">>",
            BinOp::BitOr => "|",
            BinOp::BitXor => "^",
            BinOp::BitAnd => "&",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Not,
    Neg,
    Pos,
    Invert,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoolOp {
    And,
    Or,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    NotEq,
    Lt,
    LtE,
    Gt,
    GtE,
    Is,
    IsNot,
    In,
    NotIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComprehensionKind {
    List,
    Set,
    Dict,
    Generator,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comprehension {
    pub target: Expr,
    pub iter: Expr,
    pub ifs: Vec<Expr>,
    pub is_async: bool,
}

/// One piece of an f-string.
#[derive(Debug, Clone, PartialEq)]
pub enum FStringPart {
    Literal(String),
    Value {
        value: Expr,
        conversion: Option<char>,
        format_spec: Vec<FStringPart>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExprKind {
    Name(String),
    Constant(Constant),
    /// f-string (possibly implicitly concatenated with plain literals).
    JoinedStr(Vec<FStringPart>),
    BinOp {
        left: Box<Expr>,
        op: BinOp,
        right: Box<Expr>,
    },
    UnaryOp {
        op: UnaryOp,
        operand: Box<Expr>,
    },
    BoolOp {
        op: BoolOp,
        values: Vec<Expr>,
    },
    Compare {
        left: Box<Expr>,
        ops: Vec<CmpOp>,
        comparators: Vec<Expr>,
    },
    Call {
        func: Box<Expr>,
        args: Vec<Expr>,
        keywords: Vec<Keyword>,
    },
    Attribute {
        value: Box<Expr>,
        attr: String,
    },
    Subscript {
        value: Box<Expr>,
        index: Box<Expr>,
    },
    Slice {
        lower: Option<Box<Expr>>,
        upper: Option<Box<Expr>>,
        step: Option<Box<Expr>>,
    },
    Tuple(Vec<Expr>),
    List(Vec<Expr>),
    Set(Vec<Expr>),
    /// `keys[i] == None` marks a `**mapping` entry.
    Dict {
        keys: Vec<Option<Expr>>,
        values: Vec<Expr>,
    },
    IfExp {
        test: Box<Expr>,
        body: Box<Expr>,
        orelse: Box<Expr>,
    },
    Lambda {
        params: Vec<Param>,
        body: Box<Expr>,
    },
    Comprehension {
        kind: ComprehensionKind,
        elt: Box<Expr>,
        /// Value expression for dict comprehensions.
        value: Option<Box<Expr>>,
        generators: Vec<Comprehension>,
    },
    Starred(Box<Expr>),
    NamedExpr {
        target: String,
        value: Box<Expr>,
    },
    /// `yield`, `yield from`, `await`: opaque, operands kept.
    Unknown {
        what: &'static str,
        operands: Vec<Expr>,
    },
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }

    /// Dotted name for `a.b.c` chains rooted at a plain name.
    pub fn dotted_name(&self) -> Option<String> {
        match &self.kind {
            ExprKind::Name(n) => Some(n.clone()),
            ExprKind::Attribute { value, attr } => value.dotted_name().map(|b| format!("{b}.{attr}")),
            _ => None,
        }
    }

    pub fn as_str_constant(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Constant(Constant::Str(s)) => Some(s),
            _ => None,
        }
    }

    /// Calls `f` on this expression and every sub-expression, pre-order.
    /// Lambda bodies and comprehension parts are included.
    pub fn walk(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        for child in self.children() {
            child.walk(f);
        }
    }

    pub fn children(&self) -> Vec<&Expr> {
        let mut out: Vec<&Expr> = Vec::new();
        match &self.kind {
            ExprKind::Name(_) | ExprKind::Constant(_) => {}
            ExprKind::JoinedStr(parts) => collect_fstring_exprs(parts, &mut out),
            ExprKind::BinOp { left, right, .. } => {
                out.push(left);
                out.push(right);
            }
            ExprKind::UnaryOp { operand, .. } => out.push(operand),
            ExprKind::BoolOp { values, .. } => out.extend(values.iter()),
            ExprKind::Compare { left, comparators, .. } => {
                out.push(left);
                out.extend(comparators.iter());
            }
            ExprKind::Call { func, args, keywords } => {
                out.push(func);
                out.extend(args.iter());
                out.extend(keywords.iter().map(|k| &k.value));
            }
            ExprKind::Attribute { value, .. } => out.push(value),
            ExprKind::Subscript { value, index } => {
                out.push(value);
                out.push(index);
            }
            ExprKind::Slice { lower, upper, step } => {
                for e in [lower, upper, step].into_iter().flatten() {
                    out.push(e);
                }
            }
            ExprKind::Tuple(items) | ExprKind::List(items) | ExprKind::Set(items) => out.extend(items.iter()),
            ExprKind::Dict { keys, values } => {
                for (k, v) in keys.iter().zip(values) {
                    if let Some(k) = k {
                        out.push(k);
                    }
                    out.push(v);
                }
            }
            ExprKind::IfExp { test, body, orelse } => {
                out.push(test);
                out.push(body);
                out.push(orelse);
            }
            ExprKind::Lambda { params, body } => {
                out.extend(params.iter().filter_map(|p| p.default.as_ref()));
                out.push(body);
            }
            ExprKind::Comprehension { elt, value, generators, .. } => {
                for g in generators {
                    out.push(&g.iter);
                    out.push(&g.target);
                    out.extend(g.ifs.iter());
                }
                out.push(elt);
                if let Some(v) = value {
                    out.push(v);
                }
            }
            ExprKind::Starred(e) => out.push(e),
            ExprKind::NamedExpr { value, .. } => out.push(value),
            ExprKind::Unknown { operands, .. } => out.extend(operands.iter()),
        }
        out
    }
}

fn collect_fstring_exprs<'a>(parts: &'a [FStringPart], out: &mut Vec<&'a Expr>) {
    for p in parts {
        if let FStringPart::Value { value, format_spec, .. } = p {
            out.push(value);
            collect_fstring_exprs(format_spec, out);
        }
    }
}

impl Stmt {
    /// Child statement lists (bodies of compound statements).
    pub fn bodies(&self) -> Vec<&Vec<Stmt>> {
        match &self.kind {
            StmtKind::If { body, orelse, .. } | StmtKind::While { body, orelse, .. } | StmtKind::For { body, orelse, .. } => {
                vec![body, orelse]
            }
            StmtKind::FunctionDef(f) => vec![&f.body],
            StmtKind::ClassDef(c) => vec![&c.body],
            StmtKind::Try { body, handlers, orelse, finalbody } => {
                let mut v = vec![body];
                v.extend(handlers.iter().map(|h| &h.body));
                v.push(orelse);
                v.push(finalbody);
                v
            }
            StmtKind::With { body, .. } => vec![body],
            StmtKind::Unknown { bodies, .. } => bodies.iter().collect(),
            _ => Vec::new(),
        }
    }
}

impl Stmt {
    /// Expressions owned directly by this statement (not by nested bodies).
    pub fn exprs(&self) -> Vec<&Expr> {
        let mut out: Vec<&Expr> = Vec::new();
        match &self.kind {
            StmtKind::Expr(e) => out.push(e),
            StmtKind::Assign { targets, value } => {
                out.extend(targets.iter());
                out.push(value);
            }
            StmtKind::AugAssign { target, value, .. } => {
                out.push(target);
                out.push(value);
            }
            StmtKind::AnnAssign { target, annotation, value } => {
                out.push(target);
                out.push(annotation);
                out.extend(value.iter());
            }
            StmtKind::If { test, .. } | StmtKind::While { test, .. } => out.push(test),
            StmtKind::For { target, iter, .. } => {
                out.push(target);
                out.push(iter);
            }
            StmtKind::FunctionDef(f) => {
                out.extend(f.decorators.iter());
                for p in &f.params {
                    out.extend(p.annotation.iter());
                    out.extend(p.default.iter());
                }
                out.extend(f.returns.iter());
            }
            StmtKind::ClassDef(c) => {
                out.extend(c.decorators.iter());
                out.extend(c.bases.iter());
                out.extend(c.keywords.iter().map(|k| &k.value));
            }
            StmtKind::Return(v) => out.extend(v.iter()),
            StmtKind::Raise { exc, cause } => {
                out.extend(exc.iter());
                out.extend(cause.iter());
            }
            StmtKind::Try { handlers, .. } => out.extend(handlers.iter().filter_map(|h| h.ty.as_ref())),
            StmtKind::With { items, .. } => {
                for it in items {
                    out.push(&it.context);
                    out.extend(it.target.iter());
                }
            }
            StmtKind::Assert { test, msg } => {
                out.push(test);
                out.extend(msg.iter());
            }
            StmtKind::Delete(targets) => out.extend(targets.iter()),
            StmtKind::Unknown { reads, .. } => out.extend(reads.iter()),
            StmtKind::Break
            | StmtKind::Continue
            | StmtKind::Pass
            | StmtKind::Import(_)
            | StmtKind::ImportFrom { .. }
            | StmtKind::Global(_)
            | StmtKind::Nonlocal(_) => {}
        }
        out
    }
}

/// Visits every statement in `body`, recursing into compound statements
/// (including nested function and class bodies).
pub fn walk_stmts<'a>(body: &'a [Stmt], f: &mut dyn FnMut(&'a Stmt)) {
    for s in body {
        f(s);
        for b in s.bodies() {
            walk_stmts(b, f);
        }
    }
}
