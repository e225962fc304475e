mod common;

use pa_reward::frontend::ast::{ExprKind, StmtKind};
use pa_reward::frontend::ir::{EdgeLabel, Op, ScopeKind};
use proptest::prelude::*;
use pa_reward::frontend::ssa::DefSite;
use pa_reward::frontend::{analyze_source, dump, parse, Analyzed};

fn analyzed(src: &str) -> Analyzed {
    analyze_source(src).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

fn body_blocks_with_code(a: &Analyzed, scope: usize) -> usize {
    let cfg = &a.program.scopes[scope];
    cfg.body_blocks().filter(|&b| cfg.blocks[b].instrs.iter().any(|i| !i.synthetic)).count()
}

#[test]
fn single_assignment_parses() {
    let m = parse("x = 1").unwrap();
    assert_eq!(m.body.len(), 1);
}

#[test]
fn unclosed_paren_reports_first_line() {
    let e = parse("def f(:").unwrap_err();
    assert_eq!(e.span.line, 1);
    let e = parse("x = (1,\ny = 2\n").unwrap_err();
    assert_eq!(e.span.line, 1);
}

#[test]
fn straight_line_is_one_block() {
    let a = analyzed("a = 1\nb = a + 2\nprint(b)\n");
    let cfg = a.program.module();
    assert_eq!(cfg.blocks.len(), 3);
    assert_eq!(body_blocks_with_code(&a, 0), 1);
    let succ: Vec<_> = cfg.succs(cfg.entry).map(|e| e.to).collect();
    assert_eq!(succ, vec![2]);
    let succ: Vec<_> = cfg.succs(2).map(|e| e.to).collect();
    assert_eq!(succ, vec![cfg.exit]);
    assert_eq!(cfg.succs(cfg.exit).count(), 0);
    assert_eq!(cfg.preds(cfg.entry).count(), 0);
}

#[test]
fn if_else_is_a_diamond() {
    let a = analyzed("if c:\n    x = 1\nelse:\n    x = 2\nprint(x)\n");
    let cfg = a.program.module();
    let cond = 2;
    let labels: Vec<_> = cfg.succs(cond).map(|e| e.label).collect();
    assert_eq!(labels, vec![EdgeLabel::BranchTrue, EdgeLabel::BranchFalse]);
    let branches: Vec<_> = cfg.succs(cond).map(|e| e.to).collect();
    let join: Vec<_> = branches.iter().map(|&b| cfg.succs(b).next().unwrap().to).collect();
    assert_eq!(join[0], join[1]);
    let ssa = &a.ssa[0];
    let phis = &ssa.phis[join[0]];
    let x = cfg.var_id("x").unwrap();
    let phi = phis.iter().find(|p| p.var == x).expect("phi for x at join");
    assert_eq!(phi.incoming.len(), 2);
    let versions: Vec<u32> = phi.incoming.iter().map(|(_, v)| ssa.values[v.index()].version).collect();
    assert_eq!(versions, vec![1, 2]);
    assert_eq!(ssa.values[phi.dest.index()].version, 3);
}

#[test]
fn reassignment_versions() {
    let a = analyzed("x = 1\nx = 2\ny = x\n");
    let ssa = &a.ssa[0];
    let cfg = &ssa.cfg;
    let b = 2;
    let y_instr = cfg.blocks[b].instrs.iter().position(|i| i.dest == cfg.var_id("y")).unwrap();
    let used = ssa.uses[b][y_instr][0].unwrap();
    assert_eq!(ssa.value_name(used), "x_2");
}

#[test]
fn code_after_return_is_unreachable() {
    let a = analyzed("def f():\n    return 1\n    x = 2\n");
    let f = a.program.scopes.iter().position(|c| c.name == "f").unwrap();
    let cfg = &a.program.scopes[f];
    let (b, _) = cfg
        .blocks
        .iter()
        .enumerate()
        .find(|(_, blk)| blk.instrs.iter().any(|i| !i.synthetic && i.span.line == 3))
        .unwrap();
    assert!(cfg.blocks[b].unreachable);
    assert_eq!(cfg.kind, ScopeKind::Function);
}

#[test]
fn while_loop_header_phi() {
    let a = analyzed("x = 0\nwhile x < 10:\n    x = x + 1\nprint(x)\n");
    let ssa = &a.ssa[0];
    let cfg = &ssa.cfg;
    let header = cfg.edges.iter().find(|e| e.label == EdgeLabel::LoopBack).unwrap().to;
    let x = cfg.var_id("x").unwrap();
    let phi = ssa.phis[header].iter().find(|p| p.var == x).expect("header phi");
    assert_eq!(phi.incoming.len(), 2);
}

#[test]
fn while_true_without_break_has_no_false_edge() {
    let a = analyzed("while True:\n    pass\nx = 1\n");
    let cfg = a.program.module();
    assert!(!cfg.edges.iter().any(|e| e.label == EdgeLabel::BranchFalse));
    let dead = cfg.blocks.iter().any(|b| b.unreachable && b.instrs.iter().any(|i| !i.synthetic && i.span.line == 3));
    assert!(dead);
}

#[test]
fn try_statements_have_exception_edges() {
    let src = "try:\n    a = 1\n    b = 2\nexcept ValueError as e:\n    c = 3\nfinally:\n    d = 4\n";
    let a = analyzed(src);
    let cfg = a.program.module();
    let exc = cfg.edges.iter().filter(|e| e.label == EdgeLabel::Exception).count();
    assert!(exc >= 3, "{}", dump(&a, false));
    for b in cfg.body_blocks() {
        if cfg.blocks[b].instrs.iter().any(|i| !i.synthetic) {
            assert!(!cfg.blocks[b].unreachable, "{}", dump(&a, false));
        }
    }
}

#[test]
fn every_version_single_definition() {
    let src = "def f(a, b):\n    s = 0\n    for i in range(a):\n        if i % 2:\n            s += i\n        else:\n            s -= b\n    return s\n";
    let a = analyzed(src);
    for ssa in &a.ssa {
        let mut seen = std::collections::HashSet::new();
        for (b, defs) in ssa.defs.iter().enumerate() {
            for (i, d) in defs.iter().enumerate() {
                if let Some(d) = d {
                    assert!(seen.insert(*d));
                    assert_eq!(ssa.values[d.index()].def, DefSite::Instr { block: b, index: i });
                }
            }
        }
        for (b, phis) in ssa.phis.iter().enumerate() {
            for (i, p) in phis.iter().enumerate() {
                assert!(seen.insert(p.dest));
                assert_eq!(ssa.values[p.dest.index()].def, DefSite::Phi { block: b, index: i });
                assert!(ssa.ssa_preds[b].len() >= 2);
            }
        }
        assert_eq!(seen.len(), ssa.values.len());
    }
}

#[test]
fn worked_injection_shape() {
    let src = r#"import sqlite3
conn = sqlite3.connect("db.sqlite")
cur = conn.cursor()
max = input()
min = input()
query = f"SELECT * FROM items WHERE price < {max} AND price > {min}"
cur.execute(query)
"#;
    let a = analyzed(src);
    let cfg = a.program.module();
    let calls: Vec<_> = cfg
        .blocks
        .iter()
        .flat_map(|b| &b.instrs)
        .filter_map(|i| match &i.op {
            Op::Call(c) => c.path.clone(),
            _ => None,
        })
        .collect();
    assert_eq!(calls, vec!["sqlite3.connect", "conn.cursor", "input", "input", "cur.execute"]);
    let mut input_assigns = 0;
    let mut fstring_assigns = 0;
    let mut method_calls = 0;
    for st in &a.module.body {
        match &st.kind {
            StmtKind::Assign { value, .. } => match &value.kind {
                ExprKind::Call { func, .. } if func.dotted_name().as_deref() == Some("input") => input_assigns += 1,
                ExprKind::JoinedStr(_) => fstring_assigns += 1,
                _ => {}
            },
            StmtKind::Expr(e) => {
                if let ExprKind::Call { func, .. } = &e.kind {
                    method_calls += usize::from(matches!(func.kind, ExprKind::Attribute { .. }));
                }
            }
            _ => {}
        }
    }
    assert_eq!((input_assigns, fstring_assigns, method_calls), (2, 1, 1));
}

#[test]
fn blank_line_between_methods() {
    let a = analyzed("class A:\n    def f(self):\n        return 1\n\n    def g(self):\n        return 2\n");
    let names: Vec<_> = a.program.scopes.iter().map(|s| s.qualname.clone()).collect();
    assert!(names.iter().any(|n| n.ends_with("A.g")), "{names:?}");
}

#[test]
fn cfg_reachability_matches_bfs() {
    let mut r = common::rng(7);
    let (mut dead, mut live_count) = (0, 0);
    for n in 0..600 {
        let p = common::gen_flow_program(&mut r);
        let src = p.source();
        let a = analyze_source(&src).unwrap_or_else(|e| panic!("program {n}: {e}\n{src}"));
        for cfg in &a.program.scopes {
            let reach = common::bfs_reachable(cfg);
            for b in cfg.body_blocks() {
                assert_eq!(cfg.blocks[b].unreachable, !reach[b], "program {n} block {b}\n{src}\n{}", dump(&a, false));
            }
            assert_eq!(cfg.succs(cfg.exit).count(), 0);
            assert_eq!(cfg.preds(cfg.entry).count(), 0);
        }
        let f = &a.program.scopes[1];
        let live = p.expected_liveness();
        dead += live.iter().filter(|l| !**l).count();
        live_count += live.iter().filter(|l| **l).count();
        for (k, expect) in live.iter().enumerate() {
            let line = src.lines().position(|l| l.trim() == format!("m{k} = {k}")).unwrap() as u32 + 1;
            let block = f
                .body_blocks()
                .find(|&b| f.blocks[b].instrs.iter().any(|i| !i.synthetic && i.span.line == line))
                .unwrap_or_else(|| panic!("marker m{k} not lowered\n{src}"));
            assert_eq!(!f.blocks[block].unreachable, *expect, "marker m{k} in program {n}\n{src}\n{}", dump(&a, false));
        }
    }
    assert!(dead > 100 && live_count > 100, "dead {dead}, live {live_count}");
}

#[test]
fn ssa_single_definition_on_generated_programs() {
    let mut r = common::rng(11);
    for n in 0..300 {
        let sources = [
            common::gen_flow_program(&mut r).source(),
            common::gen_int_program(&mut r, false).source(),
            common::gen_taint_program(&mut r, true).source().0,
        ];
        for src in sources {
            let a = analyze_source(&src).unwrap_or_else(|e| panic!("program {n}: {e}\n{src}"));
            for ssa in &a.ssa {
                if let Err(e) = common::check_ssa_invariants(ssa) {
                    panic!("program {n}: {e}\n{src}\n{}", dump(&a, true));
                }
            }
        }
    }
}

#[test]
fn ssa_interpretation_matches_source() {
    let mut r = common::rng(13);
    for n in 0..800 {
        let p = common::gen_int_program(&mut r, n < 500);
        let src = p.source();
        let a = analyze_source(&src).unwrap_or_else(|e| panic!("program {n}: {e}\n{src}"));
        let got = common::interpret_ssa(&a.ssa[0]).unwrap_or_else(|e| panic!("program {n}: {e}\n{src}\n{}", dump(&a, true)));
        assert_eq!(got, p.interpret(), "program {n}\n{src}\n{}", dump(&a, true));
    }
}

#[test]
fn while_loop_renaming_preserves_values() {
    let src = "x = 0\ni = 0\nwhile i < 5:\n    x = x + i\n    i = i + 1\n";
    let a = analyzed(src);
    let got = common::interpret_ssa(&a.ssa[0]).unwrap();
    assert_eq!(got["x"], 10);
    assert_eq!(got["i"], 5);
}

proptest! {
    #[test]
    fn parse_is_total_on_text(s in "\\PC{0,200}") {
        let _ = analyze_source(&s);
    }

    #[test]
    fn parse_is_total_on_bytes(b in proptest::collection::vec(any::<u8>(), 0..300)) {
        let _ = analyze_source(&String::from_utf8_lossy(&b));
    }

    #[test]
    fn parse_is_total_on_python_like_text(
        parts in proptest::collection::vec(
            prop_oneof![
                Just("def "), Just("f("), Just(")"), Just(":"), Just("\n"), Just("    "), Just("x"), Just(" = "),
                Just("'s"), Just("\""), Just("f\"{"), Just("}"), Just("["), Just("]"), Just("if "), Just("else"),
                Just("return"), Just("\\"), Just("#"), Just("1.5e"), Just("0x"), Just("lambda"), Just(","), Just("*"),
            ],
            0..60,
        )
    ) {
        let _ = analyze_source(&parts.concat());
    }
}

