//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so the lines always reach the console.

mod common;

use pa_reward::detectors::{detect_source, DetectorRegistry};
use pa_reward::eval::{evaluate_corpus, EvalReport};
use pa_reward::exec::{Harness, ResourceLimits, TestStatus};
use pa_reward::finding::{CweId, FindingKind};
use pa_reward::frontend::analyze_source;
use pa_reward::maintainability::maintainability_verdict;
use pa_reward::reward::{combine, RewardConfig, Scorer};
use pa_reward::taint::analyze_program;
use pa_reward::task::*;
use rand::{Rng, SeedableRng};
use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn tasks() -> Vec<TaskSpec> {
    load_task_corpus(&data("tasks/tasks.jsonl")).expect("bundled tasks load")
}

fn candidates(name: &str) -> Vec<CandidateProgram> {
    load_candidates(&data(&format!("tasks/{name}.jsonl"))).expect("bundled candidates load")
}

fn scorer(config: RewardConfig) -> Scorer {
    Scorer::new(DetectorRegistry::builtin(), Harness::new(ResourceLimits::default()).unwrap(), config).unwrap()
}

fn cand(id: &str, task_id: &str, source: &str) -> CandidateProgram {
    CandidateProgram { candidate_id: id.into(), task_id: task_id.into(), source: source.into() }
}

const INJECTION_EXAMPLE: &str = r#"import sqlite3
conn = sqlite3.connect("db.sqlite")
cur = conn.cursor()
max = input()
min = input()
query = f"SELECT * FROM items WHERE price < {max} AND price > {min}"
cur.execute(query)
"#;

fn worked_injection() -> Check {
    let reg = DetectorRegistry::builtin();
    let start = Instant::now();
    let f = detect_source(INJECTION_EXAMPLE, &[CweId(89)], &reg).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure!(f.len() == 1, "{} findings", f.len());
    ensure!(f[0].cwe_id == Some(CweId(89)), "tagged {:?}", f[0].cwe_id);
    let hops = f[0].evidence.hops();
    let lines: Vec<u32> = hops.iter().map(|h| h.line).collect();
    ensure!(lines == [4, 6, 7], "flow lines {lines:?}");
    ensure!(
        hops[0].text.contains("input()") && hops[1].text.starts_with("query = f\"") && hops[2].text.contains("execute"),
        "flow hops {hops:?}"
    );
    ensure!(elapsed < Duration::from_millis(100), "took {elapsed:?}");
    Ok(format!("1 CWE-89 finding, flow lines 4 -> 6 -> 7, {} us", elapsed.as_micros()))
}

fn refactor_progression() -> Check {
    let t = tasks().into_iter().find(|t| t.task_id == "sql-products").ok_or("refactoring task missing")?;
    let s = scorer(RewardConfig::default());
    let mut rows = Vec::new();
    for c in candidates("refactor_candidates") {
        let b = s.score(&c, &t).map_err(|e| e.to_string())?;
        rows.push((b.r_quality, b.r_function, b.r_hybrid));
    }
    let rq: Vec<u8> = rows.iter().map(|r| r.0).collect();
    ensure!(rq == [0, 1, 1], "r_quality {rq:?}");
    ensure!(rows[2].1 == 1.0 && rows[2].2 == 1.0, "third stage {:?}", rows[2]);
    Ok(format!("(r_q, r_f, r_h) = {rows:?}"))
}

fn labeled_recall() -> Check {
    let reg = DetectorRegistry::builtin();
    let (mut tp, mut fp, mut missed, mut total) = (0, 0, Vec::new(), 0);
    let mut per_pack: BTreeMap<u32, usize> = BTreeMap::new();
    for dir in std::fs::read_dir(data("labeled")).map_err(|e| e.to_string())? {
        let dir = dir.unwrap().path();
        let cwe: u32 = dir.file_name().unwrap().to_str().unwrap().trim_start_matches("cwe-").parse().unwrap();
        for f in std::fs::read_dir(&dir).unwrap() {
            let path = f.unwrap().path();
            let vulnerable = path.file_name().unwrap().to_str().unwrap().starts_with("vuln_");
            let src = std::fs::read_to_string(&path).unwrap();
            let flagged = detect_source(&src, &[CweId(cwe)], &reg)
                .map_err(|e| format!("{}: {e}", path.display()))?
                .iter()
                .any(|f| f.cwe_id == Some(CweId(cwe)));
            total += 1;
            *per_pack.entry(cwe).or_default() += 1;
            match (vulnerable, flagged) {
                (true, true) => tp += 1,
                (true, false) => missed.push(path.display().to_string()),
                (false, true) => fp += 1,
                (false, false) => {}
            }
        }
    }
    ensure!(total >= 40, "only {total} snippets");
    ensure!(per_pack.len() == reg.known_ids().len(), "packs covered {:?}", per_pack.keys());
    ensure!(per_pack.values().all(|&n| n >= 4), "per pack {per_pack:?}");
    ensure!(missed.is_empty(), "missed {missed:?}");
    let precision = tp as f64 / (tp + fp).max(1) as f64;
    Ok(format!("{total} snippets, recall 1.0 ({tp}/{tp}), precision {precision:.3} ({fp} false positives)"))
}

fn reward_hacking() -> Check {
    let ts = tasks();
    let solutions = candidates("solutions");
    let security: Vec<(&CandidateProgram, &TaskSpec)> =
        solutions.iter().zip(&ts).filter(|(_, t)| t.mode == Mode::Security).collect();
    ensure!(!security.is_empty(), "no security tasks");
    let empties: Vec<CandidateProgram> = security.iter().map(|(_, t)| cand("empty", &t.task_id, "")).collect();
    let empty_jobs: Vec<_> = empties.iter().zip(security.iter().map(|(_, t)| *t)).collect();
    for alpha in [0.1, 0.5, 0.9] {
        let cfg = RewardConfig { alpha, ..Default::default() };
        let s = scorer(cfg);
        let e = s.score_batch(&empty_jobs, &cfg);
        let r = s.score_batch(&security, &cfg);
        for ((e, r), (_, t)) in e.into_iter().zip(r).zip(&security) {
            let (e, r) = (e.map_err(|x| x.to_string())?, r.map_err(|x| x.to_string())?);
            ensure!(
                (e.r_quality, e.r_function, e.r_hybrid) == (1, 0.0, alpha),
                "{} empty at alpha {alpha}: {:?}",
                t.task_id,
                (e.r_quality, e.r_function, e.r_hybrid)
            );
            ensure!(r.r_hybrid > e.r_hybrid, "{} reference {} <= empty {}", t.task_id, r.r_hybrid, e.r_hybrid);
        }
    }
    Ok(format!("{} security tasks x alpha in {{0.1, 0.5, 0.9}}: empty = alpha < reference", security.len()))
}

fn penalty_path() -> Check {
    let t = tasks().into_iter().find(|t| t.task_id == "sql-dept-count").ok_or("task missing")?;
    let s = scorer(RewardConfig::default());
    let score = |src: &str| s.score(&cand("c", &t.task_id, src), &t).map_err(|e| e.to_string());
    let syntax = score("print(\n")?;
    ensure!(syntax.r_hybrid == -1.0, "syntax error gave {}", syntax.r_hybrid);
    let crash = score("raise RuntimeError('x')\n")?;
    ensure!(crash.r_hybrid == -1.0, "crash-all gave {}", crash.r_hybrid);
    let some = score(concat!(
        "import os, sqlite3\n",
        "c = sqlite3.connect(os.environ['FIXTURE_DB'])\n",
        "d = input().strip()\n",
        "n = c.execute('SELECT COUNT(*) FROM employees WHERE dept = ?', (d,)).fetchone()[0]\n",
        "print(100 // n and n)\n",
    ))?;
    ensure!(some.runnable && some.r_function > 0.0 && some.r_function < 1.0, "crash-some {:?}", some.test_statuses);
    ensure!(some.test_statuses.contains(&TestStatus::Crashed), "no crash in {:?}", some.test_statuses);
    Ok(format!("syntax -1.0, crash-all -1.0, crash-some runnable with r_f = {}", some.r_function))
}

fn reward_arithmetic() -> Check {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let rq: u8 = rng.gen_range(0..=1);
        let total: u32 = rng.gen_range(1..=40);
        let rf = f64::from(rng.gen_range(0..=total)) / f64::from(total);
        let alpha: f64 = rng.gen();
        let got = combine(rq, rf, true, &RewardConfig { alpha, ..Default::default() });
        let want = rf + alpha * (f64::from(rq) - rf);
        let err = (got - want).abs();
        ensure!(err <= 1e-12, "triple {i}: ({rq}, {rf}, {alpha}) error {err}");
        worst = worst.max(err);
    }
    Ok(format!("1000 triples, max abs error {worst:e}"))
}

fn ssa_cfg_oracles() -> Check {
    let mut r = common::rng(701);
    let n = 500;
    let (mut blocks, mut values) = (0, 0);
    for i in 0..n {
        let p = common::gen_flow_program(&mut r);
        let src = p.source();
        let a = analyze_source(&src).map_err(|e| format!("flow program {i}: {e}"))?;
        for cfg in &a.program.scopes {
            let reach = common::bfs_reachable(cfg);
            for b in cfg.body_blocks() {
                blocks += 1;
                ensure!(cfg.blocks[b].unreachable == !reach[b], "flow program {i} block {b}\n{src}");
            }
        }
        for ssa in &a.ssa {
            common::check_ssa_invariants(ssa).map_err(|e| format!("flow program {i}: {e}"))?;
            values += ssa.values.len();
        }
        let p = common::gen_int_program(&mut r, true);
        let src = p.source();
        let a = analyze_source(&src).map_err(|e| format!("int program {i}: {e}"))?;
        common::check_ssa_invariants(&a.ssa[0]).map_err(|e| format!("int program {i}: {e}"))?;
        let got = common::interpret_ssa(&a.ssa[0]).map_err(|e| format!("int program {i}: {e}"))?;
        ensure!(got == p.interpret(), "int program {i} final values differ\n{src}");
    }
    Ok(format!("{n} CFG programs ({blocks} blocks, {values} SSA values) + {n} straight-line programs"))
}

fn taint_oracle() -> Check {
    let reg = DetectorRegistry::builtin();
    let rules = reg.get(CweId(89)).ok_or("no CWE-89 pack")?;
    let mut r = common::rng(801);
    let (mut loop_free, mut with_loops, mut max_passes) = (0, 0, 0);
    for i in 0..400 {
        let p = common::gen_taint_program(&mut r, i >= 200);
        let (src, _) = p.source();
        let a = analyze_source(&src).map_err(|e| format!("program {i}: {e}"))?;
        let prog = analyze_program(&a, rules);
        let (ssa, map) = (&a.ssa[0], &prog.maps[0]);
        let expect = p.enumerate();
        for (k, name) in common::TAINT_VARS.iter().enumerate() {
            let v = ssa.exit_values[ssa.cfg.var_id(name).ok_or("missing var")?].ok_or("undefined var")?;
            ensure!(map.is_tainted(v) == expect.final_taint[k], "program {i}, variable {name}\n{src}");
        }
        let sinks: BTreeSet<u32> = prog.findings.iter().map(|f| f.span.line).collect();
        ensure!(sinks == expect.tainted_sinks, "program {i} sinks {sinks:?} != {:?}\n{src}", expect.tainted_sinks);
        ensure!(map.stats.passes <= ssa.values.len() + 1, "program {i}: {} passes", map.stats.passes);
        max_passes = max_passes.max(map.stats.passes);
        if p.has_loop() {
            with_loops += 1;
        } else {
            loop_free += 1;
        }
    }
    ensure!(loop_free >= 200, "only {loop_free} loop-free programs");
    Ok(format!("{loop_free} loop-free + {with_loops} looping programs match enumeration, max {max_passes} passes"))
}

fn mypy_parity() -> Check {
    let dir = data("maintainability");
    let golden_text = std::fs::read_to_string(dir.join("mypy_strict.txt")).map_err(|e| e.to_string())?;
    let mut golden: BTreeMap<String, (BTreeSet<u32>, BTreeSet<u32>)> = BTreeMap::new();
    for l in golden_text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let mut parts = l.splitn(3, ':');
        let file = parts.next().unwrap().to_string();
        let line: u32 = parts.next().and_then(|x| x.parse().ok()).ok_or_else(|| format!("bad line {l:?}"))?;
        let entry = golden.entry(file).or_default();
        if l.ends_with("[no-untyped-def]") {
            entry.0.insert(line);
        } else if l.ends_with("[return-value]") || l.ends_with("[return]") {
            entry.1.insert(line);
        }
    }
    let mut files: Vec<PathBuf> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "py"))
        .collect();
    files.sort();
    ensure!(files.len() == 20, "{} files", files.len());
    let mut disagreements = Vec::new();
    let mut compared = 0;
    for path in &files {
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        let report = maintainability_verdict(&std::fs::read_to_string(path).unwrap()).map_err(|e| e.to_string())?;
        let lines = |k: FindingKind| -> BTreeSet<u32> {
            report.findings.iter().filter(|f| f.kind == k).map(|f| f.span.line).collect()
        };
        let (want_ann, want_ret) = golden.get(&name).cloned().unwrap_or_default();
        compared += want_ann.len() + want_ret.len();
        for l in lines(FindingKind::MissingAnnotation).symmetric_difference(&want_ann) {
            disagreements.push(format!("{name}:{l} annotation"));
        }
        for l in lines(FindingKind::SignatureInconsistency).symmetric_difference(&want_ret) {
            disagreements.push(format!("{name}:{l} return type"));
        }
    }
    ensure!(disagreements.is_empty(), "{} disagreements: {disagreements:?}", disagreements.len());
    Ok(format!("20 files, {compared} reference lines, 0 disagreements"))
}

fn joint_law() -> Check {
    let ts = tasks();
    let s = scorer(RewardConfig::default());
    let mut reports: Vec<(String, EvalReport)> = Vec::new();
    for name in ["candidates", "solutions", "empty_candidates"] {
        let r = evaluate_corpus(&ts, &candidates(name), &s).map_err(|e| format!("{name}: {e}"))?;
        reports.push((name.to_string(), r));
    }
    let refactor_task: Vec<TaskSpec> = ts.iter().filter(|t| t.task_id == "sql-products").cloned().collect();
    for c in candidates("refactor_candidates") {
        let r = evaluate_corpus(&refactor_task, std::slice::from_ref(&c), &s).map_err(|e| e.to_string())?;
        reports.push((c.candidate_id.clone(), r));
    }
    for (name, r) in &reports {
        for (group, rates) in std::iter::once(("overall", &r.overall)).chain(r.by_group.iter().map(|(g, r)| (g.as_str(), r))) {
            ensure!(
                rates.joint_rate <= rates.func_rate.min(rates.qual_rate),
                "{name}/{group}: joint {} > min({}, {})",
                rates.joint_rate,
                rates.func_rate,
                rates.qual_rate
            );
        }
    }
    let empty = &reports[2].1.overall;
    ensure!(
        (empty.func_rate, empty.qual_rate, empty.joint_rate) == (0.0, 1.0, 0.0),
        "all-empty corpus rates {:?}",
        (empty.func_rate, empty.qual_rate, empty.joint_rate)
    );
    let sample = &reports[0].1.overall;
    Ok(format!(
        "{} corpora hold; all-empty (0.0, 1.0, 0.0); samples ({:.2}, {:.2}, {:.2})",
        reports.len(),
        sample.func_rate,
        sample.qual_rate,
        sample.joint_rate
    ))
}

fn isolation_and_timing() -> Check {
    let harness = Harness::new(ResourceLimits::default()).map_err(|e| e.to_string())?;
    let ut = |timeout_ms| UnitTest {
        test_id: "t1".into(),
        stdin_payload: String::new(),
        argv: vec![],
        expected_stdout: String::new(),
        timeout_ms,
    };
    let mut t = TaskSpec {
        task_id: "t".into(),
        prompt: String::new(),
        mode: Mode::Maintainability,
        cwe_tags: vec![],
        unit_tests: vec![ut(1000)],
        fixtures: vec![],
        entry_point: None,
    };
    let start = Instant::now();
    let r = harness
        .run_unit_tests(&cand("c", "t", "import time\nwhile True:\n    time.sleep(1)\n"), &t)
        .map_err(|e| e.to_string())?;
    let slept = start.elapsed();
    ensure!(r.outcomes[0].status == TestStatus::Timeout, "sleeper status {:?}", r.outcomes[0].status);
    ensure!(slept < Duration::from_millis(1500), "sleeper took {slept:?}");

    t.unit_tests = vec![ut(5000)];
    t.fixtures = vec![Fixture {
        fixture_id: "db".into(),
        kind: FixtureKind::SqliteScript,
        payload: FixturePayload::Text("CREATE TABLE m (v TEXT);".into()),
    }];
    let writer = cand(
        "w",
        "t",
        "import os, sqlite3, tempfile, time\nfor d in ['.', os.environ['HOME'], tempfile.gettempdir()]:\n    open(os.path.join(d, 'marker.txt'), 'w').write('x')\nc = sqlite3.connect(os.environ['FIXTURE_DB'])\nc.execute(\"INSERT INTO m VALUES ('m')\")\nc.commit()\ntime.sleep(0.5)\n",
    );
    let reader = cand(
        "r",
        "t",
        "import os, sqlite3, tempfile, time\nseen = set()\nfor _ in range(10):\n    for d in ['.', os.environ['HOME'], tempfile.gettempdir()]:\n        if os.path.exists(os.path.join(d, 'marker.txt')):\n            seen.add(d)\n    if sqlite3.connect(os.environ['FIXTURE_DB']).execute('SELECT COUNT(*) FROM m').fetchone()[0]:\n        seen.add('db')\n    time.sleep(0.1)\nprint(*sorted(seen))\n",
    );
    let runs = harness.run_batch(&[(&writer, &t), (&reader, &t)]);
    let after = harness.run_unit_tests(&reader, &t).map_err(|e| e.to_string())?;
    for res in [runs[1].as_ref().map_err(|e| e.to_string())?, &after] {
        ensure!(
            res.outcomes[0].status == TestStatus::Passed,
            "reader observed {:?}",
            res.outcomes[0].observed_stdout
        );
    }

    let ts = tasks();
    ensure!(ts.len() >= 20 && ts.iter().all(|t| t.unit_tests.len() >= 4), "corpus below 20 tasks x 4 tests");
    let sols = candidates("solutions");
    let jobs: Vec<_> = sols.iter().zip(&ts).collect();
    let s = scorer(RewardConfig::default());
    let start = Instant::now();
    let scored = s.score_batch(&jobs, &s.config);
    let full = start.elapsed();
    ensure!(scored.iter().all(|r| r.is_ok()), "scoring errors");
    ensure!(full < Duration::from_secs(60), "full corpus took {full:?}");
    Ok(format!("sleeper {} ms, marker unseen, {} tasks scored in {:.1} s", slept.as_millis(), ts.len(), full.as_secs_f64()))
}

fn main() {
    let checks: [(&str, fn() -> Check); 11] = [
        ("worked SQL injection example", worked_injection),
        ("query refactoring progression", refactor_progression),
        ("labeled corpus recall", labeled_recall),
        ("empty-candidate reward hacking", reward_hacking),
        ("penalty path", penalty_path),
        ("reward arithmetic", reward_arithmetic),
        ("SSA/CFG oracles", ssa_cfg_oracles),
        ("taint fixpoint oracle", taint_oracle),
        ("maintainability parity", mypy_parity),
        ("joint metric law", joint_law),
        ("harness isolation and bounds", isolation_and_timing),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Err(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
