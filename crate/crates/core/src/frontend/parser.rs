//! Recursive-descent parser producing [`Module`] from source text.

use super::ast::*;
use super::lexer::{tokenize, tokenize_lenient, NumLit, RawFPart, StrLit, TokKind, Token};
use super::SyntaxFailure;

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del", "elif",
    "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda", "nonlocal", "not", "or",
    "pass", "raise", "return", "try", "while", "with", "yield",
];

type PResult<T> = Result<T, SyntaxFailure>;

/// Parses a whole module. Either the full input is covered or the first
/// error is reported.
pub fn parse_module(source: &str) -> PResult<Module> {
    let (tokens, unclosed) = tokenize_lenient(source)?;
    if let Some(unclosed) = unclosed {
        // A parse error on the bracket's own line wins; otherwise point at
        // the bracket that was never closed.
        let mut p = Parser::new(tokens);
        return Err(match p.file() {
            Err(e) if e.span.line <= unclosed.span.line => e,
            _ => unclosed,
        });
    }
    let mut p = Parser::new(tokens);
    let body = p.file()?;
    let lines = std::sync::Arc::new(source.lines().map(str::to_string).collect());
    Ok(Module { body, lines })
}

#[derive(Clone, Copy, Default)]
struct Ctx {
    in_function: bool,
    in_async: bool,
    in_loop: bool,
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    ctx: Ctx,
}

fn err<T>(message: impl Into<String>, span: Span) -> PResult<T> {
    Err(SyntaxFailure { message: message.into(), span })
}

impl Parser {
    fn new(toks: Vec<Token>) -> Self {
        Parser { toks, pos: 0, ctx: Ctx::default() }
    }

    // ---- token helpers -------------------------------------------------

    fn tok(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn kind(&self) -> &TokKind {
        &self.tok().kind
    }

    fn kind_at(&self, off: usize) -> &TokKind {
        &self.toks[(self.pos + off).min(self.toks.len() - 1)].kind
    }

    fn span(&self) -> Span {
        self.tok().span
    }

    fn advance(&mut self) -> Token {
        let t = self.tok().clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn is_op(&self, op: &str) -> bool {
        matches!(self.kind(), TokKind::Op(o) if *o == op)
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.kind(), TokKind::Name(n) if n == kw)
    }

    fn is_kw_at(&self, off: usize, kw: &str) -> bool {
        matches!(self.kind_at(off), TokKind::Name(n) if n == kw)
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.is_op(op) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.is_kw(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult<Span> {
        if self.is_op(op) {
            Ok(self.advance().span)
        } else {
            err(format!("expected '{op}', found {}", self.describe()), self.span())
        }
    }

    fn expect_kw(&mut self, kw: &str) -> PResult<Span> {
        if self.is_kw(kw) {
            Ok(self.advance().span)
        } else {
            err(format!("expected '{kw}', found {}", self.describe()), self.span())
        }
    }

    fn expect_newline(&mut self) -> PResult<()> {
        match self.kind() {
            TokKind::Newline => {
                self.advance();
                Ok(())
            }
            TokKind::EndMarker => Ok(()),
            _ => err(format!("invalid syntax: unexpected {}", self.describe()), self.span()),
        }
    }

    fn identifier(&mut self) -> PResult<(String, Span)> {
        match self.kind().clone() {
            TokKind::Name(n) if !KEYWORDS.contains(&n.as_str()) => {
                let span = self.advance().span;
                Ok((n, span))
            }
            _ => err(format!("expected identifier, found {}", self.describe()), self.span()),
        }
    }

    fn describe(&self) -> String {
        match self.kind() {
            TokKind::Name(n) => format!("'{n}'"),
            TokKind::Number(_) => "number".into(),
            TokKind::Str(_) => "string".into(),
            TokKind::Op(o) => format!("'{o}'"),
            TokKind::Newline => "end of line".into(),
            TokKind::Indent => "indent".into(),
            TokKind::Dedent => "dedent".into(),
            TokKind::EndMarker => "end of input".into(),
        }
    }

    fn with_ctx<T>(&mut self, ctx: Ctx, f: impl FnOnce(&mut Self) -> PResult<T>) -> PResult<T> {
        let saved = self.ctx;
        self.ctx = ctx;
        let r = f(self);
        self.ctx = saved;
        r
    }

    // ---- statements ----------------------------------------------------

    fn file(&mut self) -> PResult<Vec<Stmt>> {
        let mut body = Vec::new();
        loop {
            match self.kind() {
                TokKind::EndMarker => break,
                TokKind::Newline => {
                    self.advance();
                }
                TokKind::Indent => return err("unexpected indent", self.span()),
                _ => body.extend(self.statement()?),
            }
        }
        Ok(body)
    }

    fn statement(&mut self) -> PResult<Vec<Stmt>> {
        let span = self.span();
        if let TokKind::Name(n) = self.kind().clone() {
            match n.as_str() {
                "if" => return Ok(vec![self.if_stmt()?]),
                "while" => return Ok(vec![self.while_stmt()?]),
                "for" => return Ok(vec![self.for_stmt(false, span)?]),
                "try" => return Ok(vec![self.try_stmt()?]),
                "with" => return Ok(vec![self.with_stmt(false, span)?]),
                "def" => return Ok(vec![self.funcdef(Vec::new(), false)?]),
                "class" => return Ok(vec![self.classdef(Vec::new(), span)?]),
                "async" => {
                    self.advance();
                    return Ok(vec![match self.kind() {
                        TokKind::Name(k) if k == "def" => self.funcdef(Vec::new(), true)?,
                        TokKind::Name(k) if k == "for" => {
                            if !self.ctx.in_async {
                                return err("asynchronous comprehension outside of an asynchronous function", span);
                            }
                            self.for_stmt(true, span)?
                        }
                        TokKind::Name(k) if k == "with" => {
                            if !self.ctx.in_async {
                                return err("'async with' outside async function", span);
                            }
                            self.with_stmt(true, span)?
                        }
                        _ => return err("invalid syntax after 'async'", self.span()),
                    }]);
                }
                "match" => {
                    let save = self.pos;
                    match self.match_stmt() {
                        Ok(Some(s)) => return Ok(vec![s]),
                        _ => self.pos = save,
                    }
                }
                _ => {}
            }
        }
        if self.is_op("@") {
            return Ok(vec![self.decorated()?]);
        }
        self.simple_stmts()
    }

    fn simple_stmts(&mut self) -> PResult<Vec<Stmt>> {
        let mut out = vec![self.simple_stmt()?];
        while self.eat_op(";") {
            if matches!(self.kind(), TokKind::Newline | TokKind::EndMarker) {
                break;
            }
            out.push(self.simple_stmt()?);
        }
        self.expect_newline()?;
        Ok(out)
    }

    fn block(&mut self) -> PResult<Vec<Stmt>> {
        self.expect_op(":")?;
        if matches!(self.kind(), TokKind::Newline) {
            self.advance();
            if !matches!(self.kind(), TokKind::Indent) {
                return err("expected an indented block", self.span());
            }
            self.advance();
            let mut body = Vec::new();
            loop {
                match self.kind() {
                    TokKind::Dedent => {
                        self.advance();
                        break;
                    }
                    TokKind::EndMarker => break,
                    TokKind::Newline => {
                        self.advance();
                    }
                    _ => body.extend(self.statement()?),
                }
            }
            Ok(body)
        } else {
            self.simple_stmts()
        }
    }

    fn simple_stmt(&mut self) -> PResult<Stmt> {
        let span = self.span();
        let kind = match self.kind().clone() {
            TokKind::Name(n) => match n.as_str() {
                "pass" => {
                    self.advance();
                    StmtKind::Pass
                }
                "break" => {
                    self.advance();
                    if !self.ctx.in_loop {
                        return err("'break' outside loop", span);
                    }
                    StmtKind::Break
                }
                "continue" => {
                    self.advance();
                    if !self.ctx.in_loop {
                        return err("'continue' not properly in loop", span);
                    }
                    StmtKind::Continue
                }
                "return" => {
                    self.advance();
                    if !self.ctx.in_function {
                        return err("'return' outside function", span);
                    }
                    if self.at_stmt_end() {
                        StmtKind::Return(None)
                    } else {
                        StmtKind::Return(Some(self.star_expressions()?))
                    }
                }
                "raise" => {
                    self.advance();
                    if self.at_stmt_end() {
                        StmtKind::Raise { exc: None, cause: None }
                    } else {
                        let exc = self.test()?;
                        let cause = if self.eat_kw("from") { Some(self.test()?) } else { None };
                        StmtKind::Raise { exc: Some(exc), cause }
                    }
                }
                "global" | "nonlocal" => {
                    self.advance();
                    if n == "nonlocal" && !self.ctx.in_function {
                        return err("nonlocal declaration not allowed at module level", span);
                    }
                    let mut names = vec![self.identifier()?.0];
                    while self.eat_op(",") {
                        names.push(self.identifier()?.0);
                    }
                    if n == "global" {
                        StmtKind::Global(names)
                    } else {
                        StmtKind::Nonlocal(names)
                    }
                }
                "del" => {
                    self.advance();
                    let targets = self.target_list()?;
                    let items = match targets.kind {
                        ExprKind::Tuple(items) => items,
                        _ => vec![targets],
                    };
                    for t in &items {
                        validate_target(t, TargetCtx::Del)?;
                    }
                    StmtKind::Delete(items)
                }
                "assert" => {
                    self.advance();
                    let test = self.test()?;
                    let msg = if self.eat_op(",") { Some(self.test()?) } else { None };
                    StmtKind::Assert { test, msg }
                }
                "import" => self.import_stmt()?,
                "from" => self.from_import()?,
                _ => self.expr_stmt()?,
            },
            _ => self.expr_stmt()?,
        };
        Ok(Stmt { kind, span })
    }

    fn at_stmt_end(&self) -> bool {
        matches!(self.kind(), TokKind::Newline | TokKind::EndMarker) || self.is_op(";")
    }

    fn expr_stmt(&mut self) -> PResult<StmtKind> {
        let first = self.star_expressions_or_yield()?;
        if self.is_op(":") {
            self.advance();
            match &first.kind {
                ExprKind::Name(_) | ExprKind::Attribute { .. } | ExprKind::Subscript { .. } => {}
                _ => return err("only single target (not tuple) can be annotated", first.span),
            }
            let annotation = self.test()?;
            let value = if self.eat_op("=") { Some(self.star_expressions_or_yield()?) } else { None };
            return Ok(StmtKind::AnnAssign { target: first, annotation, value });
        }
        if let TokKind::Op(op) = self.kind().clone() {
            if let Some(bin) = aug_op(op) {
                self.advance();
                validate_target(&first, TargetCtx::Aug)?;
                let value = self.star_expressions_or_yield()?;
                return Ok(StmtKind::AugAssign { target: first, op: bin, value });
            }
        }
        if self.is_op("=") {
            let mut exprs = vec![first];
            while self.eat_op("=") {
                exprs.push(self.star_expressions_or_yield()?);
            }
            let value = exprs.pop().unwrap_or_else(|| unreachable_expr());
            for t in &exprs {
                validate_target(t, TargetCtx::Assign)?;
            }
            return Ok(StmtKind::Assign { targets: exprs, value });
        }
        if let ExprKind::Starred(_) = first.kind {
            return err("can't use starred expression here", first.span);
        }
        Ok(StmtKind::Expr(first))
    }

    fn import_stmt(&mut self) -> PResult<StmtKind> {
        self.expect_kw("import")?;
        let mut names = Vec::new();
        loop {
            let span = self.span();
            let name = self.dotted_name()?;
            let asname = if self.eat_kw("as") { Some(self.identifier()?.0) } else { None };
            names.push(Alias { name, asname, span });
            if !self.eat_op(",") {
                break;
            }
        }
        Ok(StmtKind::Import(names))
    }

    fn dotted_name(&mut self) -> PResult<String> {
        let mut name = self.identifier()?.0;
        while self.is_op(".") {
            self.advance();
            name.push('.');
            name.push_str(&self.identifier()?.0);
        }
        Ok(name)
    }

    fn from_import(&mut self) -> PResult<StmtKind> {
        self.expect_kw("from")?;
        let mut level = 0;
        loop {
            if self.eat_op(".") {
                level += 1;
            } else if self.eat_op("...") {
                level += 3;
            } else {
                break;
            }
        }
        let module = if self.is_kw("import") { None } else { Some(self.dotted_name()?) };
        if module.is_none() && level == 0 {
            return err("invalid syntax in from-import", self.span());
        }
        self.expect_kw("import")?;
        let mut names = Vec::new();
        if self.is_op("*") {
            let span = self.advance().span;
            if self.ctx.in_function {
                return err("import * only allowed at module level", span);
            }
            names.push(Alias { name: "*".into(), asname: None, span });
            return Ok(StmtKind::ImportFrom { module, names, level });
        }
        let paren = self.eat_op("(");
        loop {
            let span = self.span();
            let name = self.identifier()?.0;
            let asname = if self.eat_kw("as") { Some(self.identifier()?.0) } else { None };
            names.push(Alias { name, asname, span });
            if !self.eat_op(",") {
                break;
            }
            if paren && self.is_op(")") {
                break;
            }
            if !paren && self.at_stmt_end() {
                return err("trailing comma not allowed without surrounding parentheses", self.span());
            }
        }
        if paren {
            self.expect_op(")")?;
        }
        Ok(StmtKind::ImportFrom { module, names, level })
    }

    fn if_stmt(&mut self) -> PResult<Stmt> {
        let span = self.advance().span; // 'if' or 'elif'
        let test = self.named_expr()?;
        let body = self.block()?;
        let orelse = if self.is_kw("elif") {
            vec![self.if_stmt()?]
        } else if self.eat_kw("else") {
            self.block()?
        } else {
            Vec::new()
        };
        Ok(Stmt { kind: StmtKind::If { test, body, orelse }, span })
    }

    fn loop_body(&mut self) -> PResult<Vec<Stmt>> {
        let ctx = Ctx { in_loop: true, ..self.ctx };
        self.with_ctx(ctx, |p| p.block())
    }

    fn while_stmt(&mut self) -> PResult<Stmt> {
        let span = self.expect_kw("while")?;
        let test = self.named_expr()?;
        let body = self.loop_body()?;
        let orelse = if self.eat_kw("else") { self.block()? } else { Vec::new() };
        Ok(Stmt { kind: StmtKind::While { test, body, orelse }, span })
    }

    fn for_stmt(&mut self, is_async: bool, span: Span) -> PResult<Stmt> {
        self.expect_kw("for")?;
        let target = self.target_list()?;
        validate_target(&target, TargetCtx::Assign)?;
        self.expect_kw("in")?;
        let iter = self.star_expressions()?;
        let body = self.loop_body()?;
        let orelse = if self.eat_kw("else") { self.block()? } else { Vec::new() };
        Ok(Stmt { kind: StmtKind::For { target, iter, body, orelse, is_async }, span })
    }

    fn try_stmt(&mut self) -> PResult<Stmt> {
        let span = self.expect_kw("try")?;
        let body = self.block()?;
        let mut handlers = Vec::new();
        while self.is_kw("except") {
            let hspan = self.advance().span;
            self.eat_op("*");
            let (ty, name) = if self.is_op(":") {
                (None, None)
            } else {
                let ty = self.test()?;
                if self.is_op(",") {
                    return err("multiple exception types must be parenthesized", self.span());
                }
                let name = if self.eat_kw("as") { Some(self.identifier()?.0) } else { None };
                (Some(ty), name)
            };
            let hbody = self.block()?;
            handlers.push(ExceptHandler { ty, name, body: hbody, span: hspan });
        }
        let orelse = if self.is_kw("else") {
            if handlers.is_empty() {
                return err("expected 'except' or 'finally' block", self.span());
            }
            self.advance();
            self.block()?
        } else {
            Vec::new()
        };
        let finalbody = if self.eat_kw("finally") { self.block()? } else { Vec::new() };
        if handlers.is_empty() && finalbody.is_empty() {
            return err("expected 'except' or 'finally' block", self.span());
        }
        Ok(Stmt { kind: StmtKind::Try { body, handlers, orelse, finalbody }, span })
    }

    fn with_stmt(&mut self, is_async: bool, span: Span) -> PResult<Stmt> {
        self.expect_kw("with")?;
        let mut items = None;
        if self.is_op("(") {
            let save = self.pos;
            match self.paren_with_items() {
                Ok(it) if self.is_op(":") => items = Some(it),
                _ => self.pos = save,
            }
        }
        let items = match items {
            Some(it) => it,
            None => {
                let mut it = vec![self.with_item()?];
                while self.eat_op(",") {
                    it.push(self.with_item()?);
                }
                it
            }
        };
        let body = self.block()?;
        Ok(Stmt { kind: StmtKind::With { items, body, is_async }, span })
    }

    fn paren_with_items(&mut self) -> PResult<Vec<WithItem>> {
        self.expect_op("(")?;
        let mut items = vec![self.with_item()?];
        while self.eat_op(",") {
            if self.is_op(")") {
                break;
            }
            items.push(self.with_item()?);
        }
        self.expect_op(")")?;
        Ok(items)
    }

    fn with_item(&mut self) -> PResult<WithItem> {
        let context = self.test()?;
        let target = if self.eat_kw("as") {
            let t = self.target_atom_list()?;
            validate_target(&t, TargetCtx::Assign)?;
            Some(t)
        } else {
            None
        };
        Ok(WithItem { context, target })
    }

    /// Single target or parenthesized target list after `as`.
    fn target_atom_list(&mut self) -> PResult<Expr> {
        self.star_or_bitor()
    }

    fn decorated(&mut self) -> PResult<Stmt> {
        let mut decorators = Vec::new();
        let span = self.span();
        while self.eat_op("@") {
            decorators.push(self.named_expr()?);
            self.expect_newline()?;
        }
        let inner_span = self.span();
        if self.is_kw("def") {
            self.funcdef(decorators, false)
        } else if self.is_kw("async") && self.is_kw_at(1, "def") {
            self.advance();
            self.funcdef(decorators, true)
        } else if self.is_kw("class") {
            self.classdef(decorators, span)
        } else {
            err("expected function or class definition after decorator", inner_span)
        }
    }

    fn funcdef(&mut self, decorators: Vec<Expr>, is_async: bool) -> PResult<Stmt> {
        let def_span = self.expect_kw("def")?;
        let (name, _) = self.identifier()?;
        self.expect_op("(")?;
        let params = self.param_list(")", true)?;
        self.expect_op(")")?;
        let returns = if self.eat_op("->") { Some(self.test()?) } else { None };
        let ctx = Ctx { in_function: true, in_async: is_async, in_loop: false };
        let body = self.with_ctx(ctx, |p| p.block())?;
        let f = FunctionDef { name, params, returns, body, decorators, is_async, span: def_span };
        Ok(Stmt { kind: StmtKind::FunctionDef(Box::new(f)), span: def_span })
    }

    fn param_list(&mut self, close: &str, annotations: bool) -> PResult<Vec<Param>> {
        let mut params: Vec<Param> = Vec::new();
        let mut seen_default = false;
        let mut kw_only = false;
        while !self.is_op(close) {
            let span = self.span();
            if self.eat_op("/") {
                // positional-only marker
            } else if self.eat_op("**") {
                let (name, nspan) = self.identifier()?;
                let annotation = if annotations && self.eat_op(":") { Some(self.test()?) } else { None };
                params.push(Param { name, annotation, default: None, kind: ParamKind::KwArgs, span: nspan });
            } else if self.eat_op("*") {
                kw_only = true;
                if !self.is_op(",") && !self.is_op(close) {
                    let (name, nspan) = self.identifier()?;
                    let annotation = if annotations && self.eat_op(":") { Some(self.star_or_test()?) } else { None };
                    params.push(Param { name, annotation, default: None, kind: ParamKind::VarArgs, span: nspan });
                }
            } else {
                let (name, nspan) = self.identifier()?;
                let annotation = if annotations && self.eat_op(":") { Some(self.test()?) } else { None };
                let default = if self.eat_op("=") { Some(self.test()?) } else { None };
                if default.is_some() {
                    seen_default = true;
                } else if seen_default && !kw_only {
                    return err("parameter without a default follows parameter with a default", span);
                }
                params.push(Param { name, annotation, default, kind: ParamKind::Normal, span: nspan });
            }
            if !self.eat_op(",") {
                break;
            }
        }
        let mut names = std::collections::HashSet::new();
        for p in &params {
            if !names.insert(p.name.clone()) {
                return err(format!("duplicate argument '{}' in function definition", p.name), p.span);
            }
        }
        Ok(params)
    }

    fn star_or_test(&mut self) -> PResult<Expr> {
        if self.is_op("*") {
            let span = self.advance().span;
            let inner = self.bitor()?;
            return Ok(Expr::new(ExprKind::Starred(Box::new(inner)), span));
        }
        self.test()
    }

    fn classdef(&mut self, decorators: Vec<Expr>, _span: Span) -> PResult<Stmt> {
        let span = self.expect_kw("class")?;
        let (name, _) = self.identifier()?;
        let (bases, keywords) = if self.eat_op("(") {
            let (a, k) = self.call_args()?;
            self.expect_op(")")?;
            (a, k)
        } else {
            (Vec::new(), Vec::new())
        };
        let ctx = Ctx { in_function: false, in_async: false, in_loop: false };
        let body = self.with_ctx(ctx, |p| p.block())?;
        let c = ClassDef { name, bases, keywords, body, decorators, span };
        Ok(Stmt { kind: StmtKind::ClassDef(Box::new(c)), span })
    }

    /// `match` statement; returns Ok(None) when the tokens are not a match
    /// statement (so the caller can re-parse as an expression).
    fn match_stmt(&mut self) -> PResult<Option<Stmt>> {
        let span = self.advance().span;
        if self.is_op("=") || self.is_op(".") || self.at_stmt_end() {
            return Ok(None);
        }
        let subject = self.star_named_expressions()?;
        if !self.is_op(":") || !matches!(self.kind_at(1), TokKind::Newline) {
            return Ok(None);
        }
        self.advance();
        self.advance();
        if !matches!(self.kind(), TokKind::Indent) {
            return Ok(None);
        }
        self.advance();
        let mut reads = vec![subject];
        let mut binds: Vec<String> = Vec::new();
        let mut bodies = Vec::new();
        while self.is_kw("case") {
            self.advance();
            let mut depth = 0usize;
            let mut prev: Option<TokKind> = None;
            loop {
                let k = self.kind().clone();
                match &k {
                    TokKind::Op(o) if matches!(*o, "(" | "[" | "{") => depth += 1,
                    TokKind::Op(o) if matches!(*o, ")" | "]" | "}") => depth = depth.saturating_sub(1),
                    TokKind::Op(":") if depth == 0 => break,
                    TokKind::Name(n) if n == "if" && depth == 0 => {
                        self.advance();
                        reads.push(self.named_expr()?);
                        break;
                    }
                    TokKind::Newline | TokKind::EndMarker | TokKind::Indent | TokKind::Dedent => {
                        return err("invalid case pattern", self.span());
                    }
                    TokKind::Name(n) => {
                        let after = self.kind_at(1).clone();
                        let prev_dot = matches!(prev, Some(TokKind::Op(".")));
                        let next_blocks = matches!(after, TokKind::Op("(") | TokKind::Op(".") | TokKind::Op("="));
                        if !prev_dot
                            && !next_blocks
                            && n != "_"
                            && n != "as"
                            && !KEYWORDS.contains(&n.as_str())
                            && !binds.contains(n)
                        {
                            binds.push(n.clone());
                        }
                    }
                    _ => {}
                }
                prev = Some(k);
                self.advance();
            }
            bodies.push(self.block()?);
        }
        if bodies.is_empty() {
            return Ok(None);
        }
        while matches!(self.kind(), TokKind::Newline) {
            self.advance();
        }
        if matches!(self.kind(), TokKind::Dedent) {
            self.advance();
        }
        Ok(Some(Stmt { kind: StmtKind::Unknown { reads, binds, bodies }, span }))
    }

    // ---- expressions ---------------------------------------------------

    fn star_expressions_or_yield(&mut self) -> PResult<Expr> {
        if self.is_kw("yield") {
            return self.yield_expr();
        }
        self.star_expressions()
    }

    fn yield_expr(&mut self) -> PResult<Expr> {
        let span = self.expect_kw("yield")?;
        if !self.ctx.in_function {
            return err("'yield' outside function", span);
        }
        if self.eat_kw("from") {
            let v = self.test()?;
            return Ok(Expr::new(ExprKind::Unknown { what: "yield from", operands: vec![v] }, span));
        }
        let operands = if self.at_expr_end() { Vec::new() } else { vec![self.star_expressions()?] };
        Ok(Expr::new(ExprKind::Unknown { what: "yield", operands }, span))
    }

    fn at_expr_end(&self) -> bool {
        self.at_stmt_end() || self.is_op(")") || self.is_op("]") || self.is_op("}") || self.is_op("=")
    }

    /// Comma-separated expressions (possibly starred); tuple if a comma occurs.
    fn star_expressions(&mut self) -> PResult<Expr> {
        let span = self.span();
        let first = self.star_expression()?;
        if !self.is_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_expr_end() || self.is_op(":") || self.is_kw("in") {
                break;
            }
            items.push(self.star_expression()?);
        }
        Ok(Expr::new(ExprKind::Tuple(items), span))
    }

    fn star_expression(&mut self) -> PResult<Expr> {
        if self.is_op("*") {
            let span = self.advance().span;
            let inner = self.bitor()?;
            return Ok(Expr::new(ExprKind::Starred(Box::new(inner)), span));
        }
        self.test()
    }

    fn star_named_expressions(&mut self) -> PResult<Expr> {
        let span = self.span();
        let first = self.star_named_expression()?;
        if !self.is_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.at_expr_end() || self.is_op(":") {
                break;
            }
            items.push(self.star_named_expression()?);
        }
        Ok(Expr::new(ExprKind::Tuple(items), span))
    }

    fn star_named_expression(&mut self) -> PResult<Expr> {
        if self.is_op("*") {
            let span = self.advance().span;
            let inner = self.bitor()?;
            return Ok(Expr::new(ExprKind::Starred(Box::new(inner)), span));
        }
        self.named_expr()
    }

    /// Target list for `for` / `del`: bitwise-or level items.
    fn target_list(&mut self) -> PResult<Expr> {
        let span = self.span();
        let first = self.star_or_bitor()?;
        if !self.is_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.is_kw("in") || self.at_expr_end() {
                break;
            }
            items.push(self.star_or_bitor()?);
        }
        Ok(Expr::new(ExprKind::Tuple(items), span))
    }

    fn star_or_bitor(&mut self) -> PResult<Expr> {
        if self.is_op("*") {
            let span = self.advance().span;
            let inner = self.bitor()?;
            return Ok(Expr::new(ExprKind::Starred(Box::new(inner)), span));
        }
        self.bitor()
    }

    fn named_expr(&mut self) -> PResult<Expr> {
        if let TokKind::Name(n) = self.kind().clone() {
            if matches!(self.kind_at(1), TokKind::Op(":=")) && !KEYWORDS.contains(&n.as_str()) {
                let span = self.advance().span;
                self.advance();
                let value = self.test()?;
                return Ok(Expr::new(ExprKind::NamedExpr { target: n, value: Box::new(value) }, span));
            }
        }
        let e = self.test()?;
        if self.is_op(":=") {
            return err("cannot use assignment expressions with this target", e.span);
        }
        Ok(e)
    }

    fn test(&mut self) -> PResult<Expr> {
        if self.is_kw("lambda") {
            return self.lambda();
        }
        let span = self.span();
        let body = self.or_test()?;
        if self.is_kw("if") {
            self.advance();
            let test = self.or_test()?;
            self.expect_kw("else")?;
            let orelse = self.test()?;
            return Ok(Expr::new(
                ExprKind::IfExp { test: Box::new(test), body: Box::new(body), orelse: Box::new(orelse) },
                span,
            ));
        }
        Ok(body)
    }

    fn lambda(&mut self) -> PResult<Expr> {
        let span = self.expect_kw("lambda")?;
        let params = self.param_list(":", false)?;
        self.expect_op(":")?;
        let ctx = Ctx { in_function: true, in_async: false, in_loop: false };
        let body = self.with_ctx(ctx, |p| p.test())?;
        Ok(Expr::new(ExprKind::Lambda { params, body: Box::new(body) }, span))
    }

    fn or_test(&mut self) -> PResult<Expr> {
        let span = self.span();
        let first = self.and_test()?;
        if !self.is_kw("or") {
            return Ok(first);
        }
        let mut values = vec![first];
        while self.eat_kw("or") {
            values.push(self.and_test()?);
        }
        Ok(Expr::new(ExprKind::BoolOp { op: BoolOp::Or, values }, span))
    }

    fn and_test(&mut self) -> PResult<Expr> {
        let span = self.span();
        let first = self.not_test()?;
        if !self.is_kw("and") {
            return Ok(first);
        }
        let mut values = vec![first];
        while self.eat_kw("and") {
            values.push(self.not_test()?);
        }
        Ok(Expr::new(ExprKind::BoolOp { op: BoolOp::And, values }, span))
    }

    fn not_test(&mut self) -> PResult<Expr> {
        if self.is_kw("not") {
            let span = self.advance().span;
            let operand = self.not_test()?;
            return Ok(Expr::new(ExprKind::UnaryOp { op: UnaryOp::Not, operand: Box::new(operand) }, span));
        }
        self.comparison()
    }

    fn comp_op(&mut self) -> Option<CmpOp> {
        let op = match self.kind() {
            TokKind::Op("<") => CmpOp::Lt,
            TokKind::Op(">") => CmpOp::Gt,
            TokKind::Op("==") => CmpOp::Eq,
            TokKind::Op(">=") => CmpOp::GtE,
            TokKind::Op("<=") => CmpOp::LtE,
            TokKind::Op("!=") => CmpOp::NotEq,
            TokKind::Name(n) if n == "in" => CmpOp::In,
            TokKind::Name(n) if n == "not" && self.is_kw_at(1, "in") => {
                self.advance();
                CmpOp::NotIn
            }
            TokKind::Name(n) if n == "is" => {
                if self.is_kw_at(1, "not") {
                    self.advance();
                    CmpOp::IsNot
                } else {
                    CmpOp::Is
                }
            }
            _ => return None,
        };
        self.advance();
        Some(op)
    }

    fn comparison(&mut self) -> PResult<Expr> {
        let span = self.span();
        let left = self.bitor()?;
        let mut ops = Vec::new();
        let mut comparators = Vec::new();
        while let Some(op) = self.comp_op() {
            ops.push(op);
            comparators.push(self.bitor()?);
        }
        if ops.is_empty() {
            return Ok(left);
        }
        Ok(Expr::new(ExprKind::Compare { left: Box::new(left), ops, comparators }, span))
    }

    fn binary_level(&mut self, level: usize) -> PResult<Expr> {
        const LEVELS: &[&[(&str, BinOp)]] = &[
            &[("|", BinOp::BitOr)],
            &[("^", BinOp::BitXor)],
            &[("&", BinOp::BitAnd)],
            &[("<<", BinOp::LShift), (">>", BinOp::RShift)],
            &[("+", BinOp::Add), ("-", BinOp::Sub)],
            &[("*", BinOp::Mult), ("/", BinOp::Div), ("//", BinOp::FloorDiv), ("%", BinOp::Mod), ("@", BinOp::MatMult)],
        ];
        if level == LEVELS.len() {
            return self.factor();
        }
        let span = self.span();
        let mut left = self.binary_level(level + 1)?;
        'outer: loop {
            for (sym, op) in LEVELS[level] {
                if self.is_op(sym) {
                    self.advance();
                    let right = self.binary_level(level + 1)?;
                    left = Expr::new(ExprKind::BinOp { left: Box::new(left), op: *op, right: Box::new(right) }, span);
                    continue 'outer;
                }
            }
            break;
        }
        Ok(left)
    }

    fn bitor(&mut self) -> PResult<Expr> {
        self.binary_level(0)
    }

    fn factor(&mut self) -> PResult<Expr> {
        let op = match self.kind() {
            TokKind::Op("+") => Some(UnaryOp::Pos),
            TokKind::Op("-") => Some(UnaryOp::Neg),
            TokKind::Op("~") => Some(UnaryOp::Invert),
            _ => None,
        };
        if let Some(op) = op {
            let span = self.advance().span;
            let operand = self.factor()?;
            return Ok(Expr::new(ExprKind::UnaryOp { op, operand: Box::new(operand) }, span));
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let span = self.span();
        let base = if self.is_kw("await") {
            let aspan = self.advance().span;
            if !self.ctx.in_async {
                return err("'await' outside async function", aspan);
            }
            let v = self.primary()?;
            Expr::new(ExprKind::Unknown { what: "await", operands: vec![v] }, aspan)
        } else {
            self.primary()?
        };
        if self.eat_op("**") {
            let exp = self.factor()?;
            return Ok(Expr::new(ExprKind::BinOp { left: Box::new(base), op: BinOp::Pow, right: Box::new(exp) }, span));
        }
        Ok(base)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        let mut e = self.atom()?;
        loop {
            if self.eat_op(".") {
                let (attr, _) = self.identifier()?;
                e = Expr::new(ExprKind::Attribute { value: Box::new(e), attr }, span);
            } else if self.is_op("(") {
                self.advance();
                let (args, keywords) = self.call_args()?;
                self.expect_op(")")?;
                e = Expr::new(ExprKind::Call { func: Box::new(e), args, keywords }, span);
            } else if self.is_op("[") {
                self.advance();
                let index = self.subscript_list()?;
                self.expect_op("]")?;
                e = Expr::new(ExprKind::Subscript { value: Box::new(e), index: Box::new(index) }, span);
            } else {
                break;
            }
        }
        Ok(e)
    }

    fn call_args(&mut self) -> PResult<(Vec<Expr>, Vec<Keyword>)> {
        let mut args = Vec::new();
        let mut keywords: Vec<Keyword> = Vec::new();
        while !self.is_op(")") {
            let span = self.span();
            if self.eat_op("**") {
                let v = self.test()?;
                keywords.push(Keyword { arg: None, value: v });
            } else if self.eat_op("*") {
                let v = self.test()?;
                args.push(Expr::new(ExprKind::Starred(Box::new(v)), span));
            } else if matches!(self.kind(), TokKind::Name(_)) && matches!(self.kind_at(1), TokKind::Op("=")) {
                let (name, _) = self.identifier()?;
                self.advance();
                let v = self.test()?;
                keywords.push(Keyword { arg: Some(name), value: v });
            } else {
                let v = self.named_expr()?;
                if self.is_kw("for") || (self.is_kw("async") && self.is_kw_at(1, "for")) {
                    let generators = self.comp_for()?;
                    let g = Expr::new(
                        ExprKind::Comprehension {
                            kind: ComprehensionKind::Generator,
                            elt: Box::new(v),
                            value: None,
                            generators,
                        },
                        span,
                    );
                    args.push(g);
                } else {
                    if !keywords.is_empty() && keywords.iter().any(|k| k.arg.is_none()) {
                        return err("positional argument follows keyword argument unpacking", span);
                    }
                    if keywords.iter().any(|k| k.arg.is_some()) {
                        return err("positional argument follows keyword argument", span);
                    }
                    args.push(v);
                }
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok((args, keywords))
    }

    fn subscript_list(&mut self) -> PResult<Expr> {
        let span = self.span();
        let first = self.subscript_item()?;
        if !self.is_op(",") {
            return Ok(first);
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.is_op("]") {
                break;
            }
            items.push(self.subscript_item()?);
        }
        Ok(Expr::new(ExprKind::Tuple(items), span))
    }

    fn subscript_item(&mut self) -> PResult<Expr> {
        let span = self.span();
        let lower = if self.is_op(":") { None } else { Some(self.star_named_expression()?) };
        if !self.is_op(":") {
            return lower.ok_or_else(|| SyntaxFailure { message: "invalid subscript".into(), span });
        }
        self.advance();
        let upper = if self.is_op(":") || self.is_op(",") || self.is_op("]") { None } else { Some(Box::new(self.test()?)) };
        let step = if self.eat_op(":") {
            if self.is_op(",") || self.is_op("]") {
                None
            } else {
                Some(Box::new(self.test()?))
            }
        } else {
            None
        };
        Ok(Expr::new(ExprKind::Slice { lower: lower.map(Box::new), upper, step }, span))
    }

    fn comp_for(&mut self) -> PResult<Vec<Comprehension>> {
        let mut gens = Vec::new();
        loop {
            let is_async = self.eat_kw("async");
            if !self.eat_kw("for") {
                if is_async {
                    return err("expected 'for' after 'async'", self.span());
                }
                break;
            }
            let target = self.target_list()?;
            validate_target(&target, TargetCtx::Assign)?;
            self.expect_kw("in")?;
            let iter = self.or_test()?;
            let mut ifs = Vec::new();
            while self.eat_kw("if") {
                ifs.push(self.or_test()?);
            }
            gens.push(Comprehension { target, iter, ifs, is_async });
        }
        Ok(gens)
    }

    fn atom(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.kind().clone() {
            TokKind::Name(n) => match n.as_str() {
                "None" => {
                    self.advance();
                    Ok(Expr::new(ExprKind::Constant(Constant::None), span))
                }
                "True" | "False" => {
                    self.advance();
                    Ok(Expr::new(ExprKind::Constant(Constant::Bool(n == "True")), span))
                }
                _ if KEYWORDS.contains(&n.as_str()) => err(format!("invalid syntax: unexpected '{n}'"), span),
                _ => {
                    self.advance();
                    Ok(Expr::new(ExprKind::Name(n), span))
                }
            },
            TokKind::Number(num) => {
                self.advance();
                let c = match num {
                    NumLit::Int(s) => match s.parse::<i64>() {
                        Ok(v) => Constant::Int(v),
                        Err(_) => Constant::BigInt(s),
                    },
                    NumLit::Float(s) => Constant::Float(s.parse::<f64>().unwrap_or(f64::INFINITY)),
                    NumLit::Imag(s) => Constant::Complex(s),
                };
                Ok(Expr::new(ExprKind::Constant(c), span))
            }
            TokKind::Str(_) => self.strings(),
            TokKind::Op("...") => {
                self.advance();
                Ok(Expr::new(ExprKind::Constant(Constant::Ellipsis), span))
            }
            TokKind::Op("(") => self.paren_atom(),
            TokKind::Op("[") => self.list_atom(),
            TokKind::Op("{") => self.brace_atom(),
            _ => err(format!("invalid syntax: unexpected {}", self.describe()), span),
        }
    }

    fn strings(&mut self) -> PResult<Expr> {
        let span = self.span();
        let mut parts: Vec<FStringPart> = Vec::new();
        let mut any_f = false;
        let mut any_bytes = false;
        let mut any_str = false;
        while let TokKind::Str(lit) = self.kind().clone() {
            let tspan = self.advance().span;
            match lit {
                StrLit::Plain { value, bytes } => {
                    if bytes {
                        any_bytes = true;
                    } else {
                        any_str = true;
                    }
                    parts.push(FStringPart::Literal(value));
                }
                StrLit::Formatted(raw) => {
                    any_f = true;
                    any_str = true;
                    parts.extend(self.fstring_parts(&raw)?);
                }
            }
            if any_bytes && any_str {
                return err("cannot mix bytes and nonbytes literals", tspan);
            }
        }
        if !any_f {
            let value: String = parts
                .into_iter()
                .map(|p| match p {
                    FStringPart::Literal(s) => s,
                    FStringPart::Value { .. } => String::new(),
                })
                .collect();
            let c = if any_bytes { Constant::Bytes(value) } else { Constant::Str(value) };
            return Ok(Expr::new(ExprKind::Constant(c), span));
        }
        // merge adjacent literal parts
        let mut merged: Vec<FStringPart> = Vec::new();
        for p in parts {
            match (merged.last_mut(), p) {
                (Some(FStringPart::Literal(a)), FStringPart::Literal(b)) => a.push_str(&b),
                (_, p) => merged.push(p),
            }
        }
        Ok(Expr::new(ExprKind::JoinedStr(merged), span))
    }

    fn fstring_parts(&mut self, raw: &[RawFPart]) -> PResult<Vec<FStringPart>> {
        let mut out = Vec::new();
        for part in raw {
            match part {
                RawFPart::Literal(s) => out.push(FStringPart::Literal(s.clone())),
                RawFPart::Expr { source, span, conversion, spec, debug_text } => {
                    if let Some(t) = debug_text {
                        out.push(FStringPart::Literal(t.clone()));
                    }
                    let value = parse_embedded_expr(source, *span, self.ctx)?;
                    let format_spec = self.fstring_parts(spec)?;
                    let conversion = if debug_text.is_some() && conversion.is_none() && spec.is_empty() {
                        Some('r')
                    } else {
                        *conversion
                    };
                    out.push(FStringPart::Value { value, conversion, format_spec });
                }
            }
        }
        Ok(out)
    }

    fn paren_atom(&mut self) -> PResult<Expr> {
        let span = self.expect_op("(")?;
        if self.eat_op(")") {
            return Ok(Expr::new(ExprKind::Tuple(Vec::new()), span));
        }
        if self.is_kw("yield") {
            let y = self.yield_expr()?;
            self.expect_op(")")?;
            return Ok(y);
        }
        let first = self.star_named_expression()?;
        if self.is_kw("for") || (self.is_kw("async") && self.is_kw_at(1, "for")) {
            let generators = self.comp_for()?;
            self.expect_op(")")?;
            return Ok(Expr::new(
                ExprKind::Comprehension { kind: ComprehensionKind::Generator, elt: Box::new(first), value: None, generators },
                span,
            ));
        }
        if self.is_op(",") {
            let mut items = vec![first];
            while self.eat_op(",") {
                if self.is_op(")") {
                    break;
                }
                items.push(self.star_named_expression()?);
            }
            self.expect_op(")")?;
            return Ok(Expr::new(ExprKind::Tuple(items), span));
        }
        self.expect_op(")")?;
        if let ExprKind::Starred(_) = first.kind {
            return err("cannot use starred expression here", first.span);
        }
        Ok(first)
    }

    fn list_atom(&mut self) -> PResult<Expr> {
        let span = self.expect_op("[")?;
        if self.eat_op("]") {
            return Ok(Expr::new(ExprKind::List(Vec::new()), span));
        }
        let first = self.star_named_expression()?;
        if self.is_kw("for") || (self.is_kw("async") && self.is_kw_at(1, "for")) {
            let generators = self.comp_for()?;
            self.expect_op("]")?;
            return Ok(Expr::new(
                ExprKind::Comprehension { kind: ComprehensionKind::List, elt: Box::new(first), value: None, generators },
                span,
            ));
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.is_op("]") {
                break;
            }
            items.push(self.star_named_expression()?);
        }
        self.expect_op("]")?;
        Ok(Expr::new(ExprKind::List(items), span))
    }

    fn brace_atom(&mut self) -> PResult<Expr> {
        let span = self.expect_op("{")?;
        if self.eat_op("}") {
            return Ok(Expr::new(ExprKind::Dict { keys: Vec::new(), values: Vec::new() }, span));
        }
        // dict?
        if self.is_op("**") {
            return self.dict_rest(span, None);
        }
        let first = self.star_named_expression()?;
        if self.eat_op(":") {
            let value = self.test()?;
            if self.is_kw("for") || (self.is_kw("async") && self.is_kw_at(1, "for")) {
                let generators = self.comp_for()?;
                self.expect_op("}")?;
                return Ok(Expr::new(
                    ExprKind::Comprehension {
                        kind: ComprehensionKind::Dict,
                        elt: Box::new(first),
                        value: Some(Box::new(value)),
                        generators,
                    },
                    span,
                ));
            }
            return self.dict_rest(span, Some((first, value)));
        }
        if self.is_kw("for") || (self.is_kw("async") && self.is_kw_at(1, "for")) {
            let generators = self.comp_for()?;
            self.expect_op("}")?;
            return Ok(Expr::new(
                ExprKind::Comprehension { kind: ComprehensionKind::Set, elt: Box::new(first), value: None, generators },
                span,
            ));
        }
        let mut items = vec![first];
        while self.eat_op(",") {
            if self.is_op("}") {
                break;
            }
            items.push(self.star_named_expression()?);
        }
        self.expect_op("}")?;
        Ok(Expr::new(ExprKind::Set(items), span))
    }

    fn dict_rest(&mut self, span: Span, first: Option<(Expr, Expr)>) -> PResult<Expr> {
        let mut keys = Vec::new();
        let mut values = Vec::new();
        let mut need_comma = false;
        if let Some((k, v)) = first {
            keys.push(Some(k));
            values.push(v);
            need_comma = true;
        }
        loop {
            if need_comma && !self.eat_op(",") {
                break;
            }
            if self.is_op("}") {
                break;
            }
            if self.eat_op("**") {
                keys.push(None);
                values.push(self.bitor()?);
            } else {
                let k = self.test()?;
                self.expect_op(":")?;
                let v = self.test()?;
                keys.push(Some(k));
                values.push(v);
            }
            need_comma = true;
        }
        self.expect_op("}")?;
        Ok(Expr::new(ExprKind::Dict { keys, values }, span))
    }
}

fn aug_op(op: &str) -> Option<BinOp> {
    Some(match op {
        "+=" => BinOp::Add,
        "-=" => BinOp::Sub,
        "*=" => BinOp::Mult,
        "@=" => BinOp::MatMult,
        "/=" => BinOp::Div,
        "//=" => BinOp::FloorDiv,
        "%=" => BinOp::Mod,
        "**=" => BinOp::Pow,
        "<<=" => BinOp::LShift,
        ">>=" => BinOp::RShift,
        "|=" => BinOp::BitOr,
        "^=" => BinOp::BitXor,
        "&=" => BinOp::BitAnd,
        _ => return None,
    })
}

fn unreachable_expr() -> Expr {
    Expr::new(ExprKind::Constant(Constant::None), Span::default())
}

#[derive(Clone, Copy, PartialEq)]
enum TargetCtx {
    Assign,
    Aug,
    Del,
}

fn validate_target(e: &Expr, ctx: TargetCtx) -> PResult<()> {
    match &e.kind {
        ExprKind::Name(_) | ExprKind::Attribute { .. } | ExprKind::Subscript { .. } => Ok(()),
        ExprKind::Tuple(items) | ExprKind::List(items) if ctx != TargetCtx::Aug => {
            let mut starred = 0;
            for i in items {
                if let ExprKind::Starred(inner) = &i.kind {
                    if ctx == TargetCtx::Del {
                        return err("cannot delete starred", i.span);
                    }
                    starred += 1;
                    validate_target(inner, ctx)?;
                } else {
                    validate_target(i, ctx)?;
                }
            }
            if starred > 1 {
                return err("multiple starred expressions in assignment", e.span);
            }
            Ok(())
        }
        ExprKind::Starred(_) => err("starred assignment target must be in a list or tuple", e.span),
        other => {
            let what = match other {
                ExprKind::Constant(_) => "literal",
                ExprKind::Call { .. } => "function call",
                ExprKind::Tuple(_) | ExprKind::List(_) => "tuple",
                ExprKind::BinOp { .. } | ExprKind::UnaryOp { .. } | ExprKind::BoolOp { .. } => "expression",
                ExprKind::Compare { .. } => "comparison",
                ExprKind::JoinedStr(_) => "f-string expression",
                ExprKind::Lambda { .. } => "lambda",
                ExprKind::NamedExpr { .. } => "named expression",
                _ => "expression",
            };
            let verb = if ctx == TargetCtx::Del { "delete" } else { "assign to" };
            err(format!("cannot {verb} {what}"), e.span)
        }
    }
}

/// Parses the source of an f-string replacement field; spans are shifted to
/// the field's location in the enclosing file.
fn parse_embedded_expr(source: &str, at: Span, ctx: Ctx) -> PResult<Expr> {
    let wrapped = format!("({source})");
    let mut toks = tokenize(&wrapped).map_err(|e| SyntaxFailure { message: format!("f-string: {}", e.message), span: at })?;
    for t in &mut toks {
        let (l, c) = (t.span.line, t.span.col);
        t.span = if l == 1 { Span::new(at.line, (at.col + c).saturating_sub(2).max(1)) } else { Span::new(at.line + l - 1, c) };
    }
    let mut p = Parser::new(toks);
    p.ctx = ctx;
    p.expect_op("(")?;
    let e = p.star_named_expressions()?;
    p.expect_op(")")?;
    if !matches!(p.kind(), TokKind::Newline | TokKind::EndMarker) {
        return err("f-string: invalid expression", at);
    }
    Ok(e)
}
