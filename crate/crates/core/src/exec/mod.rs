//! Sandboxed execution of candidates against unit tests.
//!
//! Each test runs in its own interpreter subprocess, started through a small
//! runner shim, in a fresh temporary directory with a fresh fixture database.
//! The child gets its own session (so the whole process group can be
//! killed), an address-space limit, a file-size limit, a cleared environment
//! and a stub socket layer. This is process-level isolation only; it is not
//! a security boundary against hostile code.
//!
//! The shim reports how the candidate finished on the last line of stderr:
//! `<NONCE>|status=<clean|crashed>|exc=<name-or-dash>`, where the nonce is a
//! fresh random token per run. A missing or malformed trailer counts as a
//! crash.

mod compare;

pub use compare::{compare_output, normalize_output};

use crate::task::{CandidateProgram, FixtureKind, FixturePayload, TaskSpec, UnitTest, FIXTURE_DB_ENV};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::os::unix::process::CommandExt;
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::mpsc;
use std::time::{Duration, Instant};

pub const SHIM_SOURCE: &str = include_str!("shim.py");

const STDERR_EXCERPT: usize = 2048;
const STDERR_CAP: usize = 256 * 1024;
/// Grace period for pipes to close after the process group is killed.
const DRAIN_GRACE: Duration = Duration::from_millis(500);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResourceLimits {
    /// Upper bound on any single test's wall time; a test's own
    /// `timeout_ms` applies when smaller.
    pub wall_timeout_ms: u64,
    pub max_output_bytes: usize,
    /// Address-space limit of the interpreter process (best effort).
    pub max_memory_bytes: u64,
    /// Largest file the candidate may write.
    pub max_file_bytes: u64,
    /// Tests run concurrently per candidate.
    pub workers: usize,
    pub interpreter: PathBuf,
}

impl Default for ResourceLimits {
    fn default() -> Self {
        ResourceLimits {
            wall_timeout_ms: 10_000,
            max_output_bytes: 1 << 20,
            max_memory_bytes: 1 << 30,
            max_file_bytes: 64 << 20,
            workers: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(4),
            interpreter: PathBuf::from("python3"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestStatus {
    Passed,
    Failed,
    Crashed,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test_id: String,
    pub status: TestStatus,
    pub observed_stdout: String,
    pub stderr_excerpt: String,
    pub duration_ms: u64,
    /// Exception class reported by the shim for crashes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exception: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionResult {
    pub outcomes: Vec<TestOutcome>,
    pub runnable: bool,
}

impl ExecutionResult {
    pub fn passed(&self) -> usize {
        self.outcomes.iter().filter(|o| o.status == TestStatus::Passed).count()
    }

    fn from_outcomes(outcomes: Vec<TestOutcome>) -> Self {
        let runnable = outcomes.iter().any(|o| matches!(o.status, TestStatus::Passed | TestStatus::Failed));
        ExecutionResult { outcomes, runnable }
    }
}

/// Failures of the harness itself; never attributed to the candidate.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("cannot create sandbox: {0}")]
    Sandbox(std::io::Error),
    #[error("cannot start interpreter {interpreter:?}: {source}")]
    Spawn { interpreter: PathBuf, source: std::io::Error },
    #[error("fixture {fixture_id:?} of task {task_id:?} failed: {message}")]
    Fixture { task_id: String, fixture_id: String, message: String },
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShimStatus {
    Clean,
    Crashed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trailer {
    pub status: ShimStatus,
    pub exception: Option<String>,
}

/// Parses the shim trailer: it must be the last line of `stderr` and carry
/// exactly `nonce`. Returns the trailer and the stderr text before it.
pub fn parse_trailer<'a>(stderr: &'a str, nonce: &str) -> Option<(Trailer, &'a str)> {
    let body = stderr.strip_suffix('\n')?;
    let (before, last) = match body.rfind('\n') {
        Some(i) => (&body[..i], &body[i + 1..]),
        None => ("", body),
    };
    let rest = last.strip_prefix(nonce)?.strip_prefix("|status=")?;
    let (status, exc) = rest.split_once("|exc=")?;
    let status = match status {
        "clean" => ShimStatus::Clean,
        "crashed" => ShimStatus::Crashed,
        _ => return None,
    };
    let exception = match exc {
        "-" => None,
        name if !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') => {
            Some(name.to_string())
        }
        _ => return None,
    };
    if nonce.is_empty() || (status == ShimStatus::Clean) != exception.is_none() {
        return None;
    }
    Some((Trailer { status, exception }, before))
}

pub fn fresh_nonce() -> String {
    let mut bytes = [0u8; 16];
    rand::thread_rng().fill_bytes(&mut bytes);
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// How the shim invokes the candidate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Invocation<'a> {
    Script,
    Entry(&'a str),
    /// Compile only.
    Check,
}

/// Raw result of one shim run.
#[derive(Debug, Clone)]
pub struct RawRun {
    pub stdout: Vec<u8>,
    pub stdout_truncated: bool,
    pub stderr: String,
    pub timed_out: bool,
    pub trailer: Option<Trailer>,
    pub duration: Duration,
}

/// Reads up to `cap` bytes, then keeps draining so the writer never blocks;
/// the flag reports whether anything was dropped.
fn read_capped(mut r: impl Read, cap: usize) -> (Vec<u8>, bool) {
    let mut out = Vec::new();
    let mut buf = [0u8; 8192];
    let mut dropped = false;
    loop {
        match r.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                let room = cap.saturating_sub(out.len());
                out.extend_from_slice(&buf[..n.min(room)]);
                dropped |= n > room;
            }
        }
    }
    (out, dropped)
}

/// Reads stderr keeping the head and the tail (where the trailer is).
fn read_head_tail(mut r: impl Read, cap: usize) -> String {
    let mut head = Vec::new();
    let mut tail: std::collections::VecDeque<u8> = std::collections::VecDeque::new();
    let mut buf = [0u8; 8192];
    loop {
        match r.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => {
                for &b in &buf[..n] {
                    if head.len() < cap / 2 {
                        head.push(b);
                    } else {
                        tail.push_back(b);
                        if tail.len() > cap / 2 {
                            tail.pop_front();
                        }
                    }
                }
            }
        }
    }
    head.extend(tail);
    String::from_utf8_lossy(&head).into_owned()
}

fn kill_group(child: &Child) {
    // The child leads its own session, so its pid is the process group id.
    unsafe {
        libc::killpg(child.id() as libc::pid_t, libc::SIGKILL);
    }
}

fn set_limit(resource: libc::__rlimit_resource_t, value: u64) {
    let lim = libc::rlimit { rlim_cur: value as libc::rlim_t, rlim_max: value as libc::rlim_t };
    unsafe {
        libc::setrlimit(resource, &lim);
    }
}

/// Runs the shim once in `dir`, where `candidate.py` already exists.
pub fn run_shim(
    dir: &Path,
    invocation: &Invocation<'_>,
    argv: &[String],
    stdin_payload: &str,
    extra_env: &[(&str, String)],
    timeout: Duration,
    limits: &ResourceLimits,
) -> Result<RawRun, HarnessError> {
    let shim = dir.join(".pa_shim.py");
    std::fs::write(&shim, SHIM_SOURCE).map_err(HarnessError::Sandbox)?;
    // Passed through a file the shim deletes on startup: the initial
    // environment stays readable through /proc/self/environ.
    let nonce = fresh_nonce();
    let nonce_file = dir.join(".pa_nonce");
    std::fs::write(&nonce_file, &nonce).map_err(HarnessError::Sandbox)?;
    let mut cmd = Command::new(&limits.interpreter);
    cmd.arg("-I").arg(&shim).arg(dir.join("candidate.py")).args(argv);
    cmd.current_dir(dir).env_clear();
    cmd.env("PATH", "/usr/local/bin:/usr/bin:/bin")
        .env("HOME", dir)
        .env("TMPDIR", dir)
        .env("LANG", "C.UTF-8")
        .env("PYTHONIOENCODING", "utf-8")
        .env("PYTHONDONTWRITEBYTECODE", "1")
        .env("PYTHONHASHSEED", "0")
        .env("PA_NONCE_FILE", &nonce_file);
    match invocation {
        Invocation::Script => cmd.env("PA_SHIM_MODE", "script"),
        Invocation::Entry(name) => cmd.env("PA_SHIM_MODE", "entry").env("PA_ENTRY", name),
        Invocation::Check => cmd.env("PA_SHIM_MODE", "check"),
    };
    for (k, v) in extra_env {
        cmd.env(k, v);
    }
    cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    let (mem, fsize) = (limits.max_memory_bytes, limits.max_file_bytes);
    unsafe {
        cmd.pre_exec(move || {
            libc::setsid();
            set_limit(libc::RLIMIT_AS, mem);
            set_limit(libc::RLIMIT_FSIZE, fsize);
            set_limit(libc::RLIMIT_CORE, 0);
            Ok(())
        });
    }
    let start = Instant::now();
    let mut child =
        cmd.spawn().map_err(|source| HarnessError::Spawn { interpreter: limits.interpreter.clone(), source })?;

    let mut stdin = child.stdin.take().expect("piped stdin");
    let payload = stdin_payload.as_bytes().to_vec();
    std::thread::spawn(move || {
        let _ = stdin.write_all(&payload);
    });
    let (out_tx, out_rx) = mpsc::channel();
    let stdout = child.stdout.take().expect("piped stdout");
    let cap = limits.max_output_bytes;
    std::thread::spawn(move || {
        let _ = out_tx.send(read_capped(stdout, cap));
    });
    let (err_tx, err_rx) = mpsc::channel();
    let stderr = child.stderr.take().expect("piped stderr");
    std::thread::spawn(move || {
        let _ = err_tx.send(read_head_tail(stderr, STDERR_CAP));
    });

    let deadline = start + timeout;
    let mut timed_out = false;
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) if Instant::now() >= deadline => {
                timed_out = true;
                kill_group(&child);
                let _ = child.wait();
                break;
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(2)),
            Err(_) => {
                kill_group(&child);
                let _ = child.wait();
                break;
            }
        }
    }
    let duration = start.elapsed();
    // Stray grandchildren may still hold the pipes open.
    kill_group(&child);
    let (stdout, stdout_truncated) = out_rx.recv_timeout(DRAIN_GRACE).unwrap_or_default();
    let stderr = err_rx.recv_timeout(DRAIN_GRACE).unwrap_or_default();
    let (trailer, stderr) = match parse_trailer(&stderr, &nonce) {
        Some((t, before)) => (Some(t), before.to_string()),
        None => (None, stderr),
    };
    Ok(RawRun { stdout, stdout_truncated, stderr, timed_out, trailer, duration })
}

fn excerpt(s: &str) -> String {
    let s = s.trim_end();
    if s.len() <= STDERR_EXCERPT {
        return s.to_string();
    }
    let mut cut = s.len() - STDERR_EXCERPT;
    while !s.is_char_boundary(cut) {
        cut += 1;
    }
    format!("...{}", &s[cut..])
}

/// Materializes the task's fixtures into a fresh directory.
fn prepare_sandbox(task: &TaskSpec, source: &str) -> Result<(tempfile::TempDir, Vec<(&'static str, String)>), HarnessError> {
    let dir = tempfile::Builder::new().prefix("pa-sandbox-").tempdir().map_err(HarnessError::Sandbox)?;
    std::fs::write(dir.path().join("candidate.py"), source).map_err(HarnessError::Sandbox)?;
    let mut env = Vec::new();
    for f in &task.fixtures {
        let fail = |message: String| HarnessError::Fixture {
            task_id: task.task_id.clone(),
            fixture_id: f.fixture_id.clone(),
            message,
        };
        match (&f.kind, &f.payload) {
            (FixtureKind::SqliteScript, FixturePayload::Text(script)) => {
                let db = dir.path().join("fixture.db");
                let conn = rusqlite::Connection::open(&db).map_err(|e| fail(e.to_string()))?;
                conn.execute_batch(script).map_err(|e| fail(e.to_string()))?;
                env.push((FIXTURE_DB_ENV, db.to_string_lossy().into_owned()));
            }
            (FixtureKind::FileTree, FixturePayload::Files(files)) => {
                for (rel, content) in files {
                    let p = dir.path().join(rel);
                    if let Some(parent) = p.parent() {
                        std::fs::create_dir_all(parent).map_err(HarnessError::Sandbox)?;
                    }
                    std::fs::write(&p, content).map_err(HarnessError::Sandbox)?;
                }
            }
            _ => return Err(fail("payload does not match fixture kind".into())),
        }
    }
    env.dedup_by(|a, b| a.0 == b.0);
    Ok((dir, env))
}

fn run_one(task: &TaskSpec, source: &str, test: &UnitTest, limits: &ResourceLimits) -> Result<TestOutcome, HarnessError> {
    let (dir, env) = prepare_sandbox(task, source)?;
    let invocation = match &task.entry_point {
        Some(name) => Invocation::Entry(name),
        None => Invocation::Script,
    };
    let timeout = Duration::from_millis(test.timeout_ms.min(limits.wall_timeout_ms));
    let raw = run_shim(dir.path(), &invocation, &test.argv, &test.stdin_payload, &env, timeout, limits)?;
    Ok(classify(test, raw, limits))
}

fn classify(test: &UnitTest, raw: RawRun, limits: &ResourceLimits) -> TestOutcome {
    let observed = String::from_utf8_lossy(&raw.stdout).into_owned();
    let mut note = None;
    let status = if raw.timed_out {
        note = Some(format!("killed after {} ms", raw.duration.as_millis()));
        TestStatus::Timeout
    } else {
        match &raw.trailer {
            None => {
                note = Some("no outcome trailer: interpreter killed or exited abnormally".into());
                TestStatus::Crashed
            }
            Some(t) if t.status == ShimStatus::Crashed => TestStatus::Crashed,
            Some(_) if raw.stdout_truncated => {
                note = Some(format!("output truncated at {} bytes", limits.max_output_bytes));
                TestStatus::Failed
            }
            Some(_) if compare_output(&observed, &test.expected_stdout) => TestStatus::Passed,
            Some(_) => TestStatus::Failed,
        }
    };
    TestOutcome {
        test_id: test.test_id.clone(),
        status,
        observed_stdout: normalize_output(&observed),
        stderr_excerpt: excerpt(&raw.stderr),
        duration_ms: raw.duration.as_millis() as u64,
        exception: raw.trailer.and_then(|t| t.exception),
        note,
    }
}

/// Test runner with a bounded worker pool.
pub struct Harness {
    pub limits: ResourceLimits,
    pool: rayon::ThreadPool,
}

impl Harness {
    pub fn new(limits: ResourceLimits) -> Result<Self, HarnessError> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(limits.workers.max(1))
            .thread_name(|i| format!("pa-harness-{i}"))
            .build()
            .map_err(|e| HarnessError::Pool(e.to_string()))?;
        Ok(Harness { limits, pool })
    }

    /// `true` when the interpreter rejects the source at compile time.
    fn syntax_error(&self, task: &TaskSpec, source: &str) -> Result<Option<TestOutcome>, HarnessError> {
        if crate::frontend::parse(source).is_ok() {
            return Ok(None);
        }
        let dir = tempfile::Builder::new().prefix("pa-sandbox-").tempdir().map_err(HarnessError::Sandbox)?;
        std::fs::write(dir.path().join("candidate.py"), source).map_err(HarnessError::Sandbox)?;
        let timeout = Duration::from_millis(self.limits.wall_timeout_ms);
        let raw = run_shim(dir.path(), &Invocation::Check, &[], "", &[], timeout, &self.limits)?;
        let outcome = classify(&task.unit_tests[0], raw, &self.limits);
        let is_syntax = outcome.status == TestStatus::Crashed
            && matches!(outcome.exception.as_deref(), Some("SyntaxError" | "IndentationError" | "TabError" | "ValueError"));
        Ok(is_syntax.then_some(outcome))
    }

    /// Runs every unit test of `task` against `candidate`, one outcome per
    /// test in task order.
    pub fn run_unit_tests(&self, candidate: &CandidateProgram, task: &TaskSpec) -> Result<ExecutionResult, HarnessError> {
        self.pool.install(|| {
            if let Some(failure) = self.syntax_error(task, &candidate.source)? {
                let outcomes = task
                    .unit_tests
                    .iter()
                    .map(|t| TestOutcome {
                        test_id: t.test_id.clone(),
                        status: TestStatus::Crashed,
                        observed_stdout: String::new(),
                        stderr_excerpt: failure.stderr_excerpt.clone(),
                        duration_ms: 0,
                        exception: failure.exception.clone(),
                        note: Some("candidate does not compile".into()),
                    })
                    .collect();
                return Ok(ExecutionResult { outcomes, runnable: false });
            }
            let outcomes = task
                .unit_tests
                .par_iter()
                .map(|t| run_one(task, &candidate.source, t, &self.limits))
                .collect::<Result<Vec<_>, _>>()?;
            Ok(ExecutionResult::from_outcomes(outcomes))
        })
    }

    /// Runs `f` inside the worker pool, so nested parallel work shares it.
    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }

    /// Runs many (candidate, task) pairs on the pool, order-preserving.
    pub fn run_batch(
        &self,
        jobs: &[(&CandidateProgram, &TaskSpec)],
    ) -> Vec<Result<ExecutionResult, HarnessError>> {
        self.pool.install(|| jobs.par_iter().map(|(c, t)| self.run_unit_tests(c, t)).collect())
    }
}

/// One-shot convenience wrapper around [`Harness`].
pub fn run_unit_tests(
    candidate: &CandidateProgram,
    task: &TaskSpec,
    limits: &ResourceLimits,
) -> Result<ExecutionResult, HarnessError> {
    Harness::new(limits.clone())?.run_unit_tests(candidate, task)
}
