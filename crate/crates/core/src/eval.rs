//! Corpus evaluation: functionality, quality and joint pass rates.

use crate::reward::{RewardBreakdown, RewardError, Scorer};
use crate::task::{CandidateProgram, Mode, TaskSpec};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

/// Outcome of one task under the single-sample protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEval {
    pub task_id: String,
    pub candidate_id: Option<String>,
    pub group: String,
    pub func_pass: bool,
    pub qual_pass: bool,
    pub joint_pass: bool,
    pub runnable: bool,
    pub tests_passed: usize,
    pub tests_total: usize,
    pub findings_count: usize,
    /// No candidate was supplied for the task.
    pub missing: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Rates {
    pub tasks: usize,
    pub func_pass: usize,
    pub qual_pass: usize,
    pub joint_pass: usize,
    pub func_rate: f64,
    pub qual_rate: f64,
    pub joint_rate: f64,
}

impl Rates {
    fn of<'a>(evals: impl IntoIterator<Item = &'a TaskEval>) -> Rates {
        let mut r = Rates::default();
        for e in evals {
            r.tasks += 1;
            r.func_pass += usize::from(e.func_pass);
            r.qual_pass += usize::from(e.qual_pass);
            r.joint_pass += usize::from(e.joint_pass);
        }
        if r.tasks > 0 {
            let n = r.tasks as f64;
            r.func_rate = r.func_pass as f64 / n;
            r.qual_rate = r.qual_pass as f64 / n;
            r.joint_rate = r.joint_pass as f64 / n;
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tasks: Vec<TaskEval>,
    pub overall: Rates,
    /// Keyed by CWE id, or `maintainability`.
    pub by_group: BTreeMap<String, Rates>,
    /// Tasks without a candidate, counted as failing everything.
    pub missing: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("candidate {candidate_id:?} references unknown task {task_id:?}")]
    UnknownTask { candidate_id: String, task_id: String },
    #[error("task {task_id:?} has more than one candidate ({first:?}, {second:?})")]
    DuplicateCandidate { task_id: String, first: String, second: String },
    #[error("scoring candidate {candidate_id:?}: {source}")]
    Score {
        candidate_id: String,
        #[source]
        source: RewardError,
    },
}

fn groups(task: &TaskSpec) -> Vec<String> {
    match task.mode {
        Mode::Security => task.cwe_tags.iter().map(|c| c.to_string()).collect(),
        Mode::Maintainability => vec!["maintainability".into()],
    }
}

/// Per-task verdict from a reward record. Non-runnable candidates fail both.
pub fn task_eval(task: &TaskSpec, b: Option<&RewardBreakdown>) -> TaskEval {
    let group = groups(task).join(",");
    match b {
        None => TaskEval {
            task_id: task.task_id.clone(),
            candidate_id: None,
            group,
            func_pass: false,
            qual_pass: false,
            joint_pass: false,
            runnable: false,
            tests_passed: 0,
            tests_total: task.unit_tests.len(),
            findings_count: 0,
            missing: true,
        },
        Some(b) => {
            let func_pass = b.runnable && b.tests_total > 0 && b.tests_passed == b.tests_total;
            let qual_pass = b.runnable && b.r_quality == 1;
            TaskEval {
                task_id: task.task_id.clone(),
                candidate_id: Some(b.candidate_id.clone()),
                group,
                func_pass,
                qual_pass,
                joint_pass: func_pass && qual_pass,
                runnable: b.runnable,
                tests_passed: b.tests_passed,
                tests_total: b.tests_total,
                findings_count: b.findings_count,
                missing: false,
            }
        }
    }
}

/// Aggregates per-task verdicts, in task order.
pub fn build_report(tasks: &[TaskSpec], evals: Vec<TaskEval>) -> EvalReport {
    let mut by_group: BTreeMap<String, Vec<&TaskEval>> = BTreeMap::new();
    for (t, e) in tasks.iter().zip(&evals) {
        for g in groups(t) {
            by_group.entry(g).or_default().push(e);
        }
    }
    EvalReport {
        overall: Rates::of(&evals),
        by_group: by_group.into_iter().map(|(g, es)| (g, Rates::of(es))).collect(),
        missing: evals.iter().filter(|e| e.missing).map(|e| e.task_id.clone()).collect(),
        tasks: evals,
    }
}

/// Scores one candidate per task and reports pass rates.
pub fn evaluate_corpus(
    tasks: &[TaskSpec],
    candidates: &[CandidateProgram],
    scorer: &Scorer,
) -> Result<EvalReport, EvalError> {
    let index: HashMap<&str, usize> = tasks.iter().enumerate().map(|(i, t)| (t.task_id.as_str(), i)).collect();
    let mut chosen: Vec<Option<&CandidateProgram>> = vec![None; tasks.len()];
    for c in candidates {
        let Some(&i) = index.get(c.task_id.as_str()) else {
            return Err(EvalError::UnknownTask { candidate_id: c.candidate_id.clone(), task_id: c.task_id.clone() });
        };
        if let Some(first) = chosen[i] {
            return Err(EvalError::DuplicateCandidate {
                task_id: c.task_id.clone(),
                first: first.candidate_id.clone(),
                second: c.candidate_id.clone(),
            });
        }
        chosen[i] = Some(c);
    }
    let jobs: Vec<(&CandidateProgram, &TaskSpec)> =
        tasks.iter().zip(&chosen).filter_map(|(t, c)| c.map(|c| (c, t))).collect();
    let config = crate::reward::RewardConfig { normalize: false, ..scorer.config };
    let mut scored = jobs.iter().zip(scorer.score_batch(&jobs, &config)).map(|((c, _), r)| {
        r.map_err(|source| EvalError::Score { candidate_id: c.candidate_id.clone(), source })
    });
    let mut evals = Vec::with_capacity(tasks.len());
    for (t, c) in tasks.iter().zip(&chosen) {
        let b = match c {
            Some(_) => Some(scored.next().expect("one result per job")?),
            None => None,
        };
        evals.push(task_eval(t, b.as_ref()));
    }
    Ok(build_report(tasks, evals))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    #[default]
    TableText,
    Structured,
}

fn rate_row(out: &mut String, label: &str, passed: usize, tasks: usize, rate: f64) {
    writeln!(out, "{label:<18}{passed:>7}{tasks:>7}{rate:>9.4}").unwrap();
}

/// Renders the report as a text table or as line-delimited records (one per
/// task, then one summary record).
pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::TableText => {
            let o = &report.overall;
            writeln!(out, "{:<18}{:>7}{:>7}{:>9}", "metric", "passed", "tasks", "rate").unwrap();
            rate_row(&mut out, "func_rate", o.func_pass, o.tasks, o.func_rate);
            rate_row(&mut out, "qual_rate", o.qual_pass, o.tasks, o.qual_rate);
            rate_row(&mut out, "joint_rate", o.joint_pass, o.tasks, o.joint_rate);
            out.push('\n');
            writeln!(out, "{:<18}{:>7}{:>9}{:>9}{:>9}", "group", "tasks", "func", "qual", "joint").unwrap();
            for (g, r) in &report.by_group {
                writeln!(out, "{g:<18}{:>7}{:>9.4}{:>9.4}{:>9.4}", r.tasks, r.func_rate, r.qual_rate, r.joint_rate)
                    .unwrap();
            }
            if !report.missing.is_empty() {
                writeln!(out, "\nmissing candidates: {}", report.missing.join(", ")).unwrap();
            }
        }
        ReportFormat::Structured => {
            for t in &report.tasks {
                let mut v = serde_json::to_value(t).expect("task eval serializes");
                v.as_object_mut().unwrap().insert("record".into(), "task".into());
                writeln!(out, "{v}").unwrap();
            }
            let summary = serde_json::json!({
                "record": "summary",
                "overall": report.overall,
                "by_group": report.by_group,
                "missing": report.missing,
            });
            writeln!(out, "{summary}").unwrap();
        }
    }
    out
}
