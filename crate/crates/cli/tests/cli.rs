use serde_json::Value;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
}

fn pa(args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pa-reward"));
    for (k, _) in std::env::vars().filter(|(k, _)| k.starts_with("PA_REWARD_")) {
        cmd.env_remove(k);
    }
    cmd.args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
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
fn detect_reports_findings_through_the_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let vuln = write(dir.path(), "vuln.py", INJECTION_EXAMPLE);
    let o = pa(&["detect", &vuln, "--cwe", "89"]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with(&format!("{vuln}:7:")), "{text}");
    assert_eq!(text.lines().filter(|l| l.contains("CWE-89")).count(), 1, "{text}");

    let o = pa(&["--format", "structured", "detect", &vuln]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let records: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 1);

    let clean = write(dir.path(), "clean.py", "x: int = 1\nprint(x)\n");
    let o = pa(&["detect", &clean]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());

    let untyped = write(dir.path(), "untyped.py", "def f(x):\n    return x\n");
    assert_eq!(pa(&["detect", &untyped]).status.code(), Some(0));
    assert_eq!(pa(&["detect", &untyped, "--maintainability"]).status.code(), Some(1));

    let o = pa(&["detect", dir.path().join("missing.py").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing.py"));

    let o = pa(&["detect", &vuln, "--cwe", "1234"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("CWE-89"), "known packs listed: {}", stderr(&o));
}

#[test]
fn score_writes_one_record_per_candidate() {
    let tasks = data("tasks/tasks.jsonl");
    let cands = data("tasks/candidates.jsonl");
    let args = ["--format", "structured", "score", "--tasks", tasks.to_str().unwrap(), "--candidates", cands.to_str().unwrap()];
    let o = pa(&args);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let records: Vec<Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 20);
    assert!(records.iter().all(|r| r["alpha"] == 0.5));
    let penalties = records.iter().filter(|r| r["runnable"] == false).count();
    assert_eq!(penalties, 2);
    assert!(stderr(&o).contains(&format!("summary: 20 scored, mean reward {:.4}, 2 penalties, 0 errors", {
        records.iter().map(|r| r["r_hybrid"].as_f64().unwrap()).sum::<f64>() / 20.0
    })));

    // Byte-identical on a rerun.
    assert_eq!(pa(&args).stdout, o.stdout);

    let mut pinned = vec!["--alpha", "0.2"];
    pinned.extend_from_slice(&args);
    let o = pa(&pinned);
    assert!(stdout(&o).lines().all(|l| serde_json::from_str::<Value>(l).unwrap()["alpha"] == 0.2));
}

#[test]
fn score_handles_empty_and_unknown_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = data("tasks/tasks.jsonl");
    let empty = write(dir.path(), "none.jsonl", "");
    let o = pa(&["score", "--tasks", tasks.to_str().unwrap(), "--candidates", &empty]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).is_empty());
    assert!(stderr(&o).contains("summary: 0 scored"));

    let stray = write(dir.path(), "stray.jsonl", "{\"schema_version\": 1, \"candidate_id\": \"c\", \"task_id\": \"nope\", \"source\": \"\"}\n");
    let o = pa(&["--format", "structured", "score", "--tasks", tasks.to_str().unwrap(), "--candidates", &stray]);
    assert_eq!(o.status.code(), Some(2));
    let rec: Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(rec["error"]["kind"], "unknown_task");

    let o = pa(&["score", "--tasks", "/nonexistent/tasks.jsonl", "--candidates", &empty]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn config_file_env_and_flags_layer() {
    let dir = tempfile::tempdir().unwrap();
    let tasks = data("tasks/tasks.jsonl");
    let one = write(
        dir.path(),
        "one.jsonl",
        "{\"schema_version\": 1, \"candidate_id\": \"c\", \"task_id\": \"m-fizzbuzz\", \"source\": \"\"}\n",
    );
    let cfg = write(dir.path(), "pa.toml", "[reward]\nalpha = 0.25\n");
    let base = ["--format", "structured", "score", "--tasks", tasks.to_str().unwrap(), "--candidates", &one];
    let alpha_of = |o: &Output| serde_json::from_str::<Value>(stdout(o).trim()).unwrap()["alpha"].as_f64().unwrap();

    let mut with_file = vec!["--config", &cfg];
    with_file.extend_from_slice(&base);
    assert_eq!(alpha_of(&pa(&with_file)), 0.25);

    let mut flag = vec!["--alpha", "0.75"];
    flag.extend_from_slice(&with_file);
    assert_eq!(alpha_of(&pa(&flag)), 0.75);

    let o = Command::new(env!("CARGO_BIN_EXE_pa-reward")).env("PA_REWARD_ALPHA", "0.6").args(&with_file).output().unwrap();
    assert_eq!(alpha_of(&o), 0.6);

    let bad = write(dir.path(), "bad.toml", "[reward]\nalfa = 1\n");
    let o = pa(&["--config", &bad, "score", "--tasks", tasks.to_str().unwrap(), "--candidates", &one]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.toml"));

    let o = pa(&["--alpha", "1.5", "score", "--tasks", tasks.to_str().unwrap(), "--candidates", &one]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpha"));

    let o = pa(&["--limits", "cpu=1", "score", "--tasks", tasks.to_str().unwrap(), "--candidates", &one]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn eval_prints_the_report_and_writes_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.jsonl");
    let tasks = data("tasks/tasks.jsonl");
    let empties = data("tasks/empty_candidates.jsonl");
    let o = pa(&[
        "eval",
        "--tasks",
        tasks.to_str().unwrap(),
        "--candidates",
        empties.to_str().unwrap(),
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    let rate = |name: &str| -> f64 {
        text.lines().find(|l| l.starts_with(name)).unwrap().split_whitespace().last().unwrap().parse().unwrap()
    };
    assert_eq!((rate("func_rate"), rate("qual_rate"), rate("joint_rate")), (0.0, 1.0, 0.0));
    let lines: Vec<Value> =
        std::fs::read_to_string(&out).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 21);
    assert_eq!(lines[20]["record"], "summary");
    assert_eq!(lines[20]["overall"]["qual_rate"], 1.0);

    let cands = data("tasks/candidates.jsonl");
    let o = pa(&["eval", "--tasks", tasks.to_str().unwrap(), "--candidates", cands.to_str().unwrap()]);
    assert_eq!(stdout(&o), std::fs::read_to_string(data("eval/candidates_report.txt")).unwrap());
}

#[test]
fn serve_rejects_a_busy_address() {
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = taken.local_addr().unwrap().to_string();
    let tasks = data("tasks/tasks.jsonl");
    let o = pa(&["serve", "--tasks", tasks.to_str().unwrap(), "--bind", &addr]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error"), "{}", stderr(&o));
}
