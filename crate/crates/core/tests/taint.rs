mod common;

use pa_reward::detectors::{detect, detect_source, load_rulepack, parse_rulepack, run_pack, DetectError, DetectorRegistry};
use pa_reward::finding::{CweId, Finding};
use pa_reward::frontend::{analyze_source, Analyzed};
use pa_reward::taint::rules::{CompiledPack, SanitizerPattern, SinkPattern, SourceKind, SourcePattern};
use pa_reward::taint::{analyze_program, propagate, summarize_function, RulePack};
use proptest::prelude::*;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

fn registry() -> DetectorRegistry {
    DetectorRegistry::builtin()
}

fn pack(cwe: u32) -> CompiledPack {
    registry().get(CweId(cwe)).unwrap().clone()
}

fn analyzed(src: &str) -> Analyzed {
    analyze_source(src).unwrap_or_else(|e| panic!("{e}\n{src}"))
}

fn findings(src: &str, cwe: u32) -> Vec<Finding> {
    detect_source(src, &[CweId(cwe)], &registry()).unwrap()
}

/// Final taint of a module-level variable under the standalone context.
fn module_taint(src: &str, cwe: u32, var: &str) -> bool {
    let a = analyzed(src);
    let ssa = &a.ssa[0];
    let map = propagate(ssa, &pack(cwe));
    let v = ssa.exit_values[ssa.cfg.var_id(var).unwrap()].unwrap();
    map.is_tainted(v)
}

fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

const INJECTION_EXAMPLE: &str = r#"import sqlite3
conn = sqlite3.connect("db.sqlite")
cur = conn.cursor()
max = input()
min = input()
query = f"SELECT * FROM items WHERE price < {max} AND price > {min}"
cur.execute(query)
"#;

#[test]
fn worked_injection_single_flow() {
    let start = std::time::Instant::now();
    let f = findings(INJECTION_EXAMPLE, 89);
    let elapsed = start.elapsed();
    assert_eq!(f.len(), 1, "{f:#?}");
    assert_eq!(f[0].cwe_id, Some(CweId(89)));
    let hops = f[0].evidence.hops();
    let lines: Vec<u32> = hops.iter().map(|h| h.line).collect();
    assert_eq!(lines, vec![4, 6, 7], "{hops:#?}");
    assert!(hops[0].text.contains("input()"));
    assert!(hops[1].text.contains("f\"SELECT"));
    assert!(hops[2].text.contains("cur.execute"));
    assert!(elapsed.as_millis() < 100, "{elapsed:?}");
}

#[test]
fn format_of_source_is_tainted() {
    let src = "x = input()\nq = \"SELECT {}\".format(x)\n";
    assert!(module_taint(src, 89, "x"));
    assert!(module_taint(src, 89, "q"));
}

#[test]
fn float_cast_sanitizes() {
    let src = "x = input()\ny = float(x)\n";
    assert!(module_taint(src, 89, "x"));
    assert!(!module_taint(src, 89, "y"));
}

#[test]
fn arithmetic_does_not_sanitize() {
    let src = "x = input()\ny = x * 2 + 1\n";
    assert!(module_taint(src, 89, "y"));
}

#[test]
fn no_sources_means_bottom_everywhere() {
    let src = "a = 1\nb = a + 2\nc = f\"{b}\"\nimport os\nd = os.getcwd()\n";
    let a = analyzed(src);
    for cwe in [89, 78, 22, 79] {
        let map = propagate(&a.ssa[0], &pack(cwe));
        assert_eq!(map.tainted_values().count(), 0);
    }
}

#[test]
fn loop_join_is_tainted() {
    let src = "x = input()\nwhile c:\n    x = \"constant\"\nq = x\n";
    assert!(module_taint(src, 89, "q"));
}

#[test]
fn parameterized_query_is_safe() {
    let src = "import sqlite3\ncur = sqlite3.connect('d').cursor()\nname = input()\ncur.execute(\"SELECT * FROM t WHERE name = ?\", (name,))\n";
    assert!(findings(src, 89).is_empty());
}

#[test]
fn tainted_placeholder_string_is_not_safe() {
    let src = "import sqlite3\ncur = sqlite3.connect('d').cursor()\nname = input()\ncur.execute(\"SELECT * FROM t WHERE name = ? AND \" + name, (name,))\n";
    let f = findings(src, 89);
    assert!(f.iter().any(|f| f.message.contains("argument 0")), "{f:#?}");
}

#[test]
fn literal_without_placeholder_and_params_is_flagged() {
    let src = "import sqlite3\ncur = sqlite3.connect('d').cursor()\nname = input()\ncur.execute(\"SELECT * FROM t\", name)\n";
    assert_eq!(findings(src, 89).len(), 1);
}

#[test]
fn two_independent_sinks() {
    let src = "import sqlite3\ncur = sqlite3.connect('d').cursor()\na = input()\nb = input()\ncur.execute('SELECT ' + a)\ncur.execute('SELECT ' + b)\n";
    let f = findings(src, 89);
    assert_eq!(f.len(), 2);
    assert!(f[0].span < f[1].span);
}

#[test]
fn flow_through_helper_function() {
    let src = "import sqlite3\n\ndef build(n):\n    return 'SELECT * FROM t WHERE n = ' + n\n\ncur = sqlite3.connect('d').cursor()\ncur.execute(build(input()))\n";
    let f = findings(src, 89);
    assert_eq!(f.len(), 1);
}

#[test]
fn summary_identity_and_constant() {
    let a = analyzed("def f(a):\n    return a\n\ndef g(a):\n    return 1\n\ndef h(a):\n    return float(a)\n");
    let rules = pack(89);
    let s: Vec<_> = a.ssa[1..].iter().map(|s| summarize_function(s, &rules)).collect();
    assert_eq!(s[0].param_to_return, vec![true]);
    assert_eq!(s[1].param_to_return, vec![false]);
    assert_eq!(s[2].param_to_return, vec![false]);
}

#[test]
fn recursive_functions_get_conservative_summary() {
    let a = analyzed("def f(a, n):\n    if n == 0:\n        return 1\n    return f(a, n - 1)\n");
    let s = summarize_function(&a.ssa[1], &pack(89));
    assert!(s.recursive);
    assert_eq!(s.param_to_return, vec![true, true]);
    let prog = analyze_program(&analyzed("def f(a):\n    return g(a)\n\ndef g(b):\n    return f(b)\n"), &pack(89));
    for s in prog.summaries.iter().flatten() {
        assert!(s.recursive);
        assert!(s.params_to_return());
    }
}

/// Body statements over `a` and locals `t`, `u`; the last line is the
/// returned expression.
fn summary_body() -> impl Strategy<Value = (Vec<String>, String)> {
    let var = prop_oneof![Just("a"), Just("t"), Just("u")];
    let stmt = (prop_oneof![Just("t"), Just("u")], 0..6usize, var.clone(), var.clone()).prop_map(|(d, k, x, y)| match k {
        0 => format!("{d} = {x}"),
        1 => format!("{d} = {x} + {y}"),
        2 => format!("{d} = float({x})"),
        3 => format!("{d} = 'lit'"),
        4 => format!("{d} = f\"{{{x}}}\""),
        _ => format!("{d} = int({x}) + len({y})"),
    });
    (proptest::collection::vec(stmt, 0..6), var)
        .prop_map(|(body, ret)| (body, ret.to_string()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    /// The summary agrees with inlining the body at a synthetic call site
    /// whose argument is a source.
    #[test]
    fn summary_matches_inlined_body((body, ret) in summary_body()) {
        let mut func = String::from("def f(a):\n    t = ''\n    u = ''\n");
        let mut inline = String::from("a = input()\nt = ''\nu = ''\n");
        for s in &body {
            func.push_str(&format!("    {s}\n"));
            inline.push_str(&format!("{s}\n"));
        }
        func.push_str(&format!("    return {ret}\n"));
        inline.push_str(&format!("r = {ret}\n"));
        let rules = pack(89);
        let summary = summarize_function(&analyzed(&func).ssa[1], &rules);
        prop_assert_eq!(summary.param_to_return[0], module_taint(&inline, 89, "r"), "{}\n{}", func, inline);
    }
}

#[test]
fn refactor_progression() {
    let dir = data_dir().join("refactor_stages");
    let counts: Vec<usize> = ["stage1_formatted.py", "stage2_parameterized.py", "stage3_sanitized.py"]
        .iter()
        .map(|f| findings(&std::fs::read_to_string(dir.join(f)).unwrap(), 89).len())
        .collect();
    assert_eq!(counts, vec![1, 0, 0]);
}

#[test]
fn command_injection_trace() {
    let src = "import subprocess\nhost = input()\ncmd = 'ping -c 1 ' + host\nsubprocess.run(cmd, shell=True)\n";
    let f = findings(src, 78);
    assert_eq!(f.len(), 1);
    assert_eq!(f[0].cwe_id, Some(CweId(78)));
    let lines: Vec<u32> = f[0].evidence.hops().iter().map(|h| h.line).collect();
    assert_eq!(lines, vec![2, 3, 4]);
    // Manual trace through the def-use graph: host_1 -> cmd_1 -> run arg 0.
    let a = analyzed(src);
    let ssa = &a.ssa[0];
    let host = ssa.exit_values[ssa.cfg.var_id("host").unwrap()].unwrap();
    let cmd = ssa.exit_values[ssa.cfg.var_id("cmd").unwrap()].unwrap();
    let uses_host: Vec<_> = ssa.users[host.index()].clone();
    assert!(uses_host.iter().any(|u| matches!(u, pa_reward::frontend::ssa::UseSite::Instr { block, index, .. } if ssa.defs[*block][*index] == Some(cmd))));
    assert!(!ssa.users[cmd.index()].is_empty());
}

#[test]
fn irrelevant_pack_adds_nothing() {
    let one = detect_source(INJECTION_EXAMPLE, &[CweId(89)], &registry()).unwrap();
    let two = detect_source(INJECTION_EXAMPLE, &[CweId(89), CweId(78)], &registry()).unwrap();
    assert_eq!(one, two);
    assert_eq!(two.len(), 1);
}

#[test]
fn empty_tags_yield_nothing() {
    assert!(detect_source(INJECTION_EXAMPLE, &[], &registry()).unwrap().is_empty());
}

#[test]
fn unknown_cwe_lists_known_ids() {
    let err = detect_source(INJECTION_EXAMPLE, &[CweId(1234)], &registry()).unwrap_err();
    assert!(matches!(err, DetectError::UnknownCwe { .. }));
    let text = err.to_string();
    for id in ["CWE-22", "CWE-78", "CWE-79", "CWE-89", "CWE-352"] {
        assert!(text.contains(id), "{text}");
    }
}

#[test]
fn builtin_sql_pack_contents() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("rulepacks/cwe-89.toml");
    let p = load_rulepack(&path).unwrap();
    assert_eq!(p.cwe, CweId(89));
    assert!(p.sinks.iter().any(|s| s.pattern == "execute"));
    assert!(p.sources.iter().any(|s| s.pattern == "input"));
    assert!(p.sanitizers.iter().any(|s| s.pattern == "float"));
    assert!(p.sanitizers.iter().any(|s| s.pattern == "int"));
    assert!(!p.safe_sink_forms.is_empty());
    assert!(!p.known_false_negatives.is_empty());
}

#[test]
fn pack_without_sinks_is_rejected() {
    let err = parse_rulepack("cwe = 89\nname = \"x\"\n[[sources]]\npattern = \"input\"\n", Path::new("x.toml")).unwrap_err();
    assert!(err.to_string().contains("pack can never fire"), "{err}");
}

#[test]
fn malformed_pattern_names_text_and_reason() {
    let doc = "cwe = 89\nname = \"x\"\n[[sources]]\npattern = \"in..put\"\n[[sinks]]\npattern = \"execute\"\nargs = [0]\n";
    let err = parse_rulepack(doc, Path::new("x.toml")).unwrap_err().to_string();
    assert!(err.contains("in..put") && err.contains("not an identifier"), "{err}");
}

#[test]
fn extension_packs_shadow_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let doc = "cwe = 89\nname = \"strict-sql\"\n[[sources]]\npattern = \"input\"\n[[sinks]]\npattern = \"run_query\"\nargs = [0]\n";
    std::fs::write(dir.path().join("sql.toml"), doc).unwrap();
    let doc = "cwe = 94\nname = \"code-injection\"\n[[sources]]\npattern = \"input\"\n[[sinks]]\npattern = \"eval\"\nargs = [0]\n";
    std::fs::write(dir.path().join("eval.toml"), doc).unwrap();
    let reg = DetectorRegistry::with_extensions(dir.path()).unwrap();
    assert_eq!(reg.get(CweId(89)).unwrap().pack.name, "strict-sql");
    assert!(detect_source(INJECTION_EXAMPLE, &[CweId(89)], &reg).unwrap().is_empty());
    assert_eq!(detect_source("x = input()\neval(x)\n", &[CweId(94)], &reg).unwrap().len(), 1);
    assert_eq!(registry().get(CweId(89)).unwrap().pack.name, pack(89).pack.name);
}

struct Labeled {
    path: PathBuf,
    cwe: u32,
    vulnerable: bool,
    source: String,
}

fn labeled_corpus() -> Vec<Labeled> {
    let mut out = Vec::new();
    let root = data_dir().join("labeled");
    let mut dirs: Vec<_> = std::fs::read_dir(&root).unwrap().map(|e| e.unwrap().path()).collect();
    dirs.sort();
    for d in dirs {
        let cwe: u32 = d.file_name().unwrap().to_str().unwrap().trim_start_matches("cwe-").parse().unwrap();
        let mut files: Vec<_> = std::fs::read_dir(&d).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        for f in files {
            let name = f.file_name().unwrap().to_str().unwrap().to_string();
            out.push(Labeled { cwe, vulnerable: name.starts_with("vuln_"), source: std::fs::read_to_string(&f).unwrap(), path: f });
        }
    }
    out
}

#[test]
fn labeled_corpus_recall_and_precision() {
    let corpus = labeled_corpus();
    assert!(corpus.len() >= 40);
    let reg = registry();
    let (mut tp, mut fp, mut fneg) = (0, 0, 0);
    for cwe in reg.known_ids() {
        let snippets: Vec<_> = corpus.iter().filter(|l| l.cwe == cwe.0).collect();
        assert!(snippets.len() >= 4, "{cwe}");
        assert!(snippets.iter().any(|l| l.vulnerable) && snippets.iter().any(|l| !l.vulnerable));
    }
    for l in &corpus {
        let f = detect_source(&l.source, &[CweId(l.cwe)], &reg).unwrap();
        let flagged = f.iter().any(|f| f.cwe_id == Some(CweId(l.cwe)));
        match (l.vulnerable, flagged) {
            (true, true) => tp += 1,
            (true, false) => {
                fneg += 1;
                eprintln!("missed: {}", l.path.display());
            }
            (false, true) => {
                fp += 1;
                eprintln!("false positive: {}", l.path.display());
            }
            (false, false) => {}
        }
    }
    let precision = tp as f64 / (tp + fp).max(1) as f64;
    println!("labeled corpus: {tp} true positives, {fp} false positives, {fneg} misses, precision {precision:.3}");
    assert_eq!(fneg, 0, "recall must be 1.0");
}

#[test]
fn every_builtin_pack_is_live() {
    let corpus = labeled_corpus();
    let reg = registry();
    for p in reg.packs() {
        let results: Vec<bool> = corpus
            .iter()
            .map(|l| !run_pack(&analyzed(&l.source), p).is_empty())
            .collect();
        assert!(results.iter().any(|&b| b), "{} never fires", p.pack.cwe);
        assert!(results.iter().any(|&b| !b), "{} always fires", p.pack.cwe);
    }
}

#[test]
fn flow_paths_are_connected() {
    for l in labeled_corpus() {
        let a = analyzed(&l.source);
        let rules = pack(l.cwe);
        if rules.pack.structural.is_some() {
            continue;
        }
        let prog = analyze_program(&a, &rules);
        prog.validate_paths(&a.ssa, &rules).unwrap_or_else(|e| panic!("{}: {e}", l.path.display()));
        for f in &prog.findings {
            let hops = f.evidence.hops();
            assert!(hops.len() >= 2, "{}", l.path.display());
            assert_eq!(hops.last().unwrap().span(), f.span);
        }
    }
}

#[test]
fn findings_are_deterministic_across_threads() {
    use rayon::prelude::*;
    let corpus = labeled_corpus();
    let all: Vec<CweId> = registry().known_ids();
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            corpus
                .par_iter()
                .map(|l| detect_source(&l.source, &all, &registry()).unwrap())
                .collect::<Vec<_>>()
        })
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(1));
    for f in &one {
        let mut sorted = f.clone();
        sorted.sort_by_key(|x| x.sort_key());
        assert_eq!(&sorted, f);
    }
}

fn tag_subsets() -> impl Strategy<Value = (Vec<u32>, Vec<u32>)> {
    let ids = prop_oneof![Just(22u32), Just(78), Just(79), Just(89), Just(352)];
    (proptest::collection::vec(ids.clone(), 0..4), proptest::collection::vec(ids, 0..4))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn detect_is_additive(idx in 0usize..52, (a, b) in tag_subsets()) {
        let corpus = labeled_corpus();
        let l = &corpus[idx % corpus.len()];
        let an = analyzed(&l.source);
        let reg = registry();
        let ids = |v: &[u32]| v.iter().map(|&c| CweId(c)).collect::<Vec<_>>();
        let union: Vec<u32> = a.iter().chain(&b).copied().collect();
        let fa: BTreeSet<_> = detect(&an, &ids(&a), &reg).unwrap().into_iter().map(|f| format!("{f:?}")).collect();
        let fb: BTreeSet<_> = detect(&an, &ids(&b), &reg).unwrap().into_iter().map(|f| format!("{f:?}")).collect();
        let fu: BTreeSet<_> = detect(&an, &ids(&union), &reg).unwrap().into_iter().map(|f| format!("{f:?}")).collect();
        prop_assert_eq!(fu, fa.union(&fb).cloned().collect::<BTreeSet<_>>());
    }
}

fn ident() -> impl Strategy<Value = String> {
    "[a-z_][a-z0-9_]{0,6}"
}

fn dotted() -> impl Strategy<Value = String> {
    proptest::collection::vec(ident(), 1..4).prop_map(|v| v.join("."))
}

fn arb_pack() -> impl Strategy<Value = RulePack> {
    let source = (dotted(), 0..2usize).prop_map(|(pattern, k)| SourcePattern {
        pattern,
        kind: if k == 0 { SourceKind::Call } else { SourceKind::Attribute },
    });
    let sink = (dotted(), proptest::collection::vec(0usize..4, 1..3), proptest::collection::vec(ident(), 0..2), any::<bool>())
        .prop_map(|(pattern, args, keywords, receiver)| SinkPattern { pattern, kind: Default::default(), args, keywords, receiver });
    (
        1u32..2000,
        ident(),
        proptest::collection::vec(source, 1..4),
        proptest::collection::vec(sink, 1..4),
        proptest::collection::vec(dotted().prop_map(|pattern| SanitizerPattern { pattern }), 0..3),
        any::<bool>(),
    )
        .prop_map(|(cwe, name, mut sources, sinks, sanitizers, entry)| {
            if entry {
                sources.push(SourcePattern { pattern: String::new(), kind: SourceKind::EntryParam });
            }
            RulePack {
                cwe: CweId(cwe),
                name,
                description: String::new(),
                detector: Default::default(),
                sources,
                sinks,
                sanitizers,
                safe_sink_forms: Vec::new(),
                structural: None,
                known_false_negatives: vec!["taint through files".into()],
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rulepack_round_trip(p in arb_pack()) {
        let text = p.to_toml();
        let back = parse_rulepack(&text, Path::new("gen.toml")).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn builtin_packs_round_trip(i in 0usize..5) {
        let (name, text) = pa_reward::detectors::BUILTIN_PACKS[i];
        let p = parse_rulepack(text, Path::new(name)).unwrap();
        prop_assert_eq!(parse_rulepack(&p.to_toml(), Path::new(name)).unwrap(), p);
    }

    /// Adding a source pattern never removes a finding.
    #[test]
    fn extra_source_is_monotone(idx in 0usize..52, extra in prop_oneof![
        Just("getenv".to_string()), Just("os.environ".to_string()), Just("fetchall".to_string()),
        Just("connect".to_string()), Just("get".to_string()), Just("read".to_string()), dotted(),
    ], attr in any::<bool>()) {
        let corpus = labeled_corpus();
        let l = &corpus[idx % corpus.len()];
        let base = pack(l.cwe);
        if base.pack.structural.is_some() {
            return Ok(());
        }
        let mut ext = base.pack.clone();
        ext.sources.push(SourcePattern { pattern: extra, kind: if attr { SourceKind::Attribute } else { SourceKind::Call } });
        let ext = ext.compile().unwrap();
        let a = analyzed(&l.source);
        let before: BTreeSet<_> = run_pack(&a, &base).iter().map(|f| f.span).collect();
        let after: BTreeSet<_> = run_pack(&a, &ext).iter().map(|f| f.span).collect();
        prop_assert!(before.is_subset(&after), "{}: {:?} vs {:?}", l.path.display(), before, after);
    }
}

#[test]
fn fixpoint_matches_path_enumeration_loop_free() {
    let mut r = common::rng(21);
    let rules = pack(89);
    for n in 0..300 {
        let p = common::gen_taint_program(&mut r, false);
        check_against_enumeration(n, &p, &rules);
    }
}

#[test]
fn fixpoint_with_loops_matches_enumeration_within_bound() {
    let mut r = common::rng(22);
    let rules = pack(89);
    let mut with_loops = 0;
    for n in 0..300 {
        let p = common::gen_taint_program(&mut r, true);
        with_loops += usize::from(p.has_loop());
        check_against_enumeration(n, &p, &rules);
    }
    assert!(with_loops >= 50, "{with_loops}");
}

fn check_against_enumeration(n: usize, p: &common::TaintProgram, rules: &CompiledPack) {
    let (src, _) = p.source();
    let a = analyzed(&src);
    let prog = analyze_program(&a, rules);
    let ssa = &a.ssa[0];
    let map = &prog.maps[0];
    let expect = p.enumerate();
    for (k, name) in common::TAINT_VARS.iter().enumerate() {
        let v = ssa.exit_values[ssa.cfg.var_id(name).unwrap()].unwrap();
        assert_eq!(map.is_tainted(v), expect.final_taint[k], "program {n}, variable {name}\n{src}");
    }
    let sinks: BTreeSet<u32> = prog.findings.iter().map(|f| f.span.line).collect();
    assert_eq!(sinks, expect.tainted_sinks, "program {n}\n{src}");
    // Binary lattice: every productive pass raises at least one value.
    let bound = ssa.values.len() + 1;
    assert!(map.stats.passes <= bound, "program {n}: {} passes > {bound}", map.stats.passes);
    assert!(map.stats.updates <= ssa.values.len());
}

#[test]
fn less_than_before_a_word_is_not_markup() {
    assert!(findings(INJECTION_EXAMPLE, 79).is_empty());
    assert_eq!(findings("x = input()\nhtml = f\"<b>{x}</b>\"\n", 79).len(), 1);
    assert_eq!(findings("x = input()\nhtml = '<!-- ' + x\n", 79).len(), 1);
}
