//! Structural cross-site request forgery check: state-changing request
//! handlers must validate an anti-forgery token, unless protection is
//! enabled globally and the handler is not exempted.

use crate::finding::{CweId, Evidence, Finding, FindingKind, Severity};
use crate::frontend::ast::*;
use crate::taint::rules::{path_matches, StructuralRules};
use regex::Regex;

fn callee_name(e: &Expr) -> Option<String> {
    match &e.kind {
        ExprKind::Call { func, .. } => func.dotted_name(),
        _ => e.dotted_name(),
    }
}

fn matches_any(patterns: &[String], name: &str) -> bool {
    patterns.iter().any(|p| path_matches(p, name))
}

fn strings_in(e: &Expr) -> Vec<String> {
    let mut out = Vec::new();
    e.walk(&mut |x| {
        if let Some(s) = x.as_str_constant() {
            out.push(s.to_string());
        }
    });
    out
}

fn exprs_in_body(body: &[Stmt]) -> Vec<&Expr> {
    let mut out = Vec::new();
    walk_stmts(body, &mut |s| {
        if !matches!(s.kind, StmtKind::FunctionDef(_) | StmtKind::ClassDef(_)) {
            out.extend(s.exprs());
        }
    });
    out
}

struct Handler<'a> {
    def: &'a FunctionDef,
    exempt: bool,
    /// Protected by framework default unless exempted.
    framework_default: bool,
}

/// Runs the structural check over a parsed module.
pub fn check_csrf(module: &Module, rules: &StructuralRules, cwe: CweId) -> Vec<Finding> {
    let mention = Regex::new(&rules.token_mention).expect("validated pack");
    let mut global = false;
    walk_stmts(&module.body, &mut |s| {
        for e in s.exprs() {
            e.walk(&mut |x| {
                if let ExprKind::Call { func, .. } = &x.kind {
                    if func.dotted_name().is_some_and(|n| matches_any(&rules.global_protection, &n)) {
                        global = true;
                    }
                }
            });
        }
    });
    let mut handlers: Vec<Handler> = Vec::new();
    collect_handlers(&module.body, rules, false, &mut handlers);
    let mut out = Vec::new();
    for h in handlers {
        let protected_globally = (global || h.framework_default) && !h.exempt;
        if protected_globally || checks_token(&h.def.body, rules, &mention) {
            continue;
        }
        let why = if h.exempt { "is exempted from" } else { "has no" };
        out.push(Finding {
            cwe_id: Some(cwe),
            kind: FindingKind::Vulnerability,
            severity: Severity::Vulnerability,
            message: format!(
                "{}: state-changing handler `{}` {why} anti-forgery token validation",
                cwe.short_name().unwrap_or("CSRF"),
                h.def.name
            ),
            span: h.def.span,
            evidence: Evidence::Location { span: h.def.span, text: module.line_text(h.def.span.line).to_string() },
        });
    }
    out
}

fn collect_handlers<'a>(body: &'a [Stmt], rules: &StructuralRules, in_view_class: bool, out: &mut Vec<Handler<'a>>) {
    for s in body {
        match &s.kind {
            StmtKind::FunctionDef(f) => {
                if let Some(h) = classify(f, rules, in_view_class) {
                    out.push(h);
                }
                collect_handlers(&f.body, rules, false, out);
            }
            StmtKind::ClassDef(c) => {
                let view = c.bases.iter().filter_map(|b| b.dotted_name()).any(|n| n.ends_with("View") || n.ends_with("Resource"));
                collect_handlers(&c.body, rules, view, out);
            }
            _ => {
                for b in s.bodies() {
                    collect_handlers(b, rules, in_view_class, out);
                }
            }
        }
    }
}

fn classify<'a>(f: &'a FunctionDef, rules: &StructuralRules, in_view_class: bool) -> Option<Handler<'a>> {
    let names: Vec<String> = f.decorators.iter().filter_map(callee_name).collect();
    let exempt = names.iter().any(|n| matches_any(&rules.exempt_markers, n));
    let is_handler = names.iter().any(|n| matches_any(&rules.handler_decorators, n));
    let changes_state = |methods: &[String]| methods.iter().any(|m| rules.state_changing_methods.iter().any(|s| s.eq_ignore_ascii_case(m)));
    if is_handler {
        let mut state = names.iter().any(|n| matches_any(&rules.state_changing_decorators, n));
        for d in &f.decorators {
            if let ExprKind::Call { args, keywords, .. } = &d.kind {
                for k in keywords.iter().filter(|k| k.arg.as_deref() == Some("methods")) {
                    state |= changes_state(&strings_in(&k.value));
                }
                if callee_name(d).is_some_and(|n| n.ends_with("require_http_methods") || n.ends_with("api_view")) {
                    for a in args {
                        state |= changes_state(&strings_in(a));
                    }
                }
            }
        }
        return state.then_some(Handler { def: f, exempt, framework_default: false });
    }
    if in_view_class && changes_state(std::slice::from_ref(&f.name)) {
        return Some(Handler { def: f, exempt, framework_default: false });
    }
    // Function-level views receiving the request object rely on framework
    // middleware; they are reported only when explicitly exempted.
    let takes_request = f.params.iter().any(|p| rules.request_params.contains(&p.name));
    if takes_request && exempt && handles_state_change(&f.body, rules) {
        return Some(Handler { def: f, exempt, framework_default: true });
    }
    None
}

fn handles_state_change(body: &[Stmt], rules: &StructuralRules) -> bool {
    let mut found = false;
    for e in exprs_in_body(body) {
        e.walk(&mut |x| match &x.kind {
            ExprKind::Attribute { attr, .. } if rules.state_changing_methods.contains(attr) => found = true,
            ExprKind::Compare { .. } => {
                let text = strings_in(x);
                let mut is_method = false;
                x.walk(&mut |y| {
                    if let ExprKind::Attribute { attr, .. } = &y.kind {
                        is_method |= attr == "method";
                    }
                });
                if is_method && text.iter().any(|t| rules.state_changing_methods.iter().any(|m| m.eq_ignore_ascii_case(t))) {
                    found = true;
                }
            }
            ExprKind::Call { func, .. } => {
                if func.dotted_name().is_some_and(|n| matches_any(&rules.state_change_calls, &n)) {
                    found = true;
                }
            }
            _ => {}
        });
    }
    found
}

/// A token-check call, or a comparison involving a token-named value.
fn checks_token(body: &[Stmt], rules: &StructuralRules, mention: &Regex) -> bool {
    let mut found = false;
    for e in exprs_in_body(body) {
        e.walk(&mut |x| match &x.kind {
            ExprKind::Call { func, .. } => {
                if func.dotted_name().is_some_and(|n| matches_any(&rules.token_checks, &n)) {
                    found = true;
                }
            }
            ExprKind::Compare { .. } => {
                let mut mentions = false;
                x.walk(&mut |y| match &y.kind {
                    ExprKind::Name(n) | ExprKind::Attribute { attr: n, .. } => mentions |= mention.is_match(n),
                    ExprKind::Constant(Constant::Str(s)) => mentions |= mention.is_match(s),
                    _ => {}
                });
                found |= mentions;
            }
            _ => {}
        });
    }
    found
}
