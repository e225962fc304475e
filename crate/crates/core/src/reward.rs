//! Quality, functionality and hybrid rewards.

use crate::detectors::{detect_source, DetectError, DetectorRegistry};
use crate::exec::{ExecutionResult, Harness, HarnessError, TestStatus};
use crate::finding::Finding;
use crate::maintainability::maintainability_verdict;
use crate::task::{CandidateProgram, Mode, TaskSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Weight of the quality reward; `1 - alpha` goes to functionality.
    pub alpha: f64,
    /// Reward of candidates that are not runnable.
    pub penalty: f64,
    /// Adds batch-normalized rewards to scored batches.
    pub normalize: bool,
    pub epsilon: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig { alpha: 0.5, penalty: -1.0, normalize: false, epsilon: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("alpha must lie in [0, 1], got {0}")]
    Alpha(f64),
    #[error("penalty must be negative, got {0}")]
    Penalty(f64),
    #[error("epsilon must be positive, got {0}")]
    Epsilon(f64),
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(ConfigError::Alpha(self.alpha));
        }
        if !(self.penalty < 0.0) || !self.penalty.is_finite() {
            return Err(ConfigError::Penalty(self.penalty));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(ConfigError::Epsilon(self.epsilon));
        }
        Ok(())
    }

    /// Applies the set fields of `o` on top of `self`.
    pub fn with(mut self, o: &RewardOverrides) -> Self {
        if let Some(a) = o.alpha {
            self.alpha = a;
        }
        if let Some(p) = o.penalty {
            self.penalty = p;
        }
        if let Some(n) = o.normalize {
            self.normalize = n;
        }
        if let Some(e) = o.epsilon {
            self.epsilon = e;
        }
        self
    }
}

/// Partial configuration from one source (config file, request, flags).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// Reward record of one candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub candidate_id: String,
    pub task_id: String,
    pub r_quality: u8,
    pub r_function: f64,
    pub r_hybrid: f64,
    pub runnable: bool,
    pub findings_count: usize,
    pub tests_passed: usize,
    pub tests_total: usize,
    pub alpha: f64,
    pub test_statuses: Vec<TestStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Failures outside the candidate's control; never turned into a penalty.
#[derive(Debug, thiserror::Error)]
pub enum RewardError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Detect(DetectError),
    #[error("candidate {candidate_id:?} references unknown task {task_id:?}")]
    UnknownTask { candidate_id: String, task_id: String },
}

impl RewardError {
    /// Stable machine-readable error kind.
    pub fn kind(&self) -> &'static str {
        match self {
            RewardError::Config(_) => "config",
            RewardError::Harness(_) => "harness",
            RewardError::Detect(_) => "detector",
            RewardError::UnknownTask { .. } => "unknown_task",
        }
    }
}

/// Quality verdict with the findings behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct Quality {
    pub reward: u8,
    pub findings: Vec<Finding>,
}

/// 1 when the task's checks report nothing, else 0. Security tasks run the
/// detectors named by the task's CWE tags, maintainability tasks the
/// maintainability checks. Fails with [`DetectError::Syntax`] when the
/// source does not parse.
pub fn quality_reward(source: &str, task: &TaskSpec, registry: &DetectorRegistry) -> Result<Quality, DetectError> {
    let findings = match task.mode {
        Mode::Security => detect_source(source, &task.cwe_tags, registry)?,
        Mode::Maintainability => maintainability_verdict(source)?.findings,
    };
    Ok(Quality { reward: u8::from(findings.is_empty()), findings })
}

/// Fraction of passed tests, as the correctly rounded value of the ratio.
pub fn function_reward(exec: &ExecutionResult) -> f64 {
    let total = exec.outcomes.len();
    if total == 0 {
        return 0.0;
    }
    exec.passed() as f64 / total as f64
}

/// `alpha * r_quality + (1 - alpha) * r_function`, or the penalty.
pub fn combine(r_quality: u8, r_function: f64, runnable: bool, config: &RewardConfig) -> f64 {
    if !runnable {
        return config.penalty;
    }
    config.alpha * f64::from(r_quality) + (1.0 - config.alpha) * r_function
}

/// Sets `normalized = (r_hybrid - mean) / (std + epsilon)` with the
/// population standard deviation of the batch.
pub fn normalize_batch(batch: &mut [RewardBreakdown], config: &RewardConfig) {
    if batch.is_empty() {
        return;
    }
    let n = batch.len() as f64;
    let mean = batch.iter().map(|b| b.r_hybrid).sum::<f64>() / n;
    let var = batch.iter().map(|b| (b.r_hybrid - mean).powi(2)).sum::<f64>() / n;
    let scale = var.sqrt() + config.epsilon;
    for b in batch {
        b.normalized = Some((b.r_hybrid - mean) / scale);
    }
}

/// Scores candidates: analysis, sandboxed tests and reward combination.
pub struct Scorer {
    pub registry: DetectorRegistry,
    pub harness: Harness,
    pub config: RewardConfig,
}

impl Scorer {
    pub fn new(registry: DetectorRegistry, harness: Harness, config: RewardConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Scorer { registry, harness, config })
    }

    pub fn score(&self, candidate: &CandidateProgram, task: &TaskSpec) -> Result<RewardBreakdown, RewardError> {
        self.score_with(candidate, task, &self.config)
    }

    pub fn score_with(
        &self,
        candidate: &CandidateProgram,
        task: &TaskSpec,
        config: &RewardConfig,
    ) -> Result<RewardBreakdown, RewardError> {
        config.validate()?;
        let quality = match quality_reward(&candidate.source, task, &self.registry) {
            Ok(q) => Some(q),
            Err(DetectError::Syntax(_)) => None,
            Err(e) => return Err(RewardError::Detect(e)),
        };
        let exec = self.harness.run_unit_tests(candidate, task)?;
        let mut note = None;
        // The interpreter accepted code our parser rejects: run it, but
        // never certify quality we could not check.
        if quality.is_none() && exec.runnable {
            note = Some("source uses syntax the analyzer does not support; quality reward withheld".to_string());
        }
        let runnable = exec.runnable;
        let r_quality = if runnable { quality.as_ref().map_or(0, |q| q.reward) } else { 0 };
        let r_function = if runnable { function_reward(&exec) } else { 0.0 };
        Ok(RewardBreakdown {
            candidate_id: candidate.candidate_id.clone(),
            task_id: task.task_id.clone(),
            r_quality,
            r_function,
            r_hybrid: combine(r_quality, r_function, runnable, config),
            runnable,
            findings_count: quality.map_or(0, |q| q.findings.len()),
            tests_passed: exec.passed(),
            tests_total: exec.outcomes.len(),
            alpha: config.alpha,
            test_statuses: exec.outcomes.iter().map(|o| o.status).collect(),
            normalized: None,
            note,
        })
    }

    /// Scores a batch in parallel on the harness pool, order-preserving;
    /// normalizes the successfully scored records when configured.
    pub fn score_batch(
        &self,
        items: &[(&CandidateProgram, &TaskSpec)],
        config: &RewardConfig,
    ) -> Vec<Result<RewardBreakdown, RewardError>> {
        let mut out: Vec<_> =
            self.harness.install(|| items.par_iter().map(|(c, t)| self.score_with(c, t, config)).collect());
        if config.normalize {
            let mut scored: Vec<RewardBreakdown> = out.iter().filter_map(|r| r.as_ref().ok().cloned()).collect();
            normalize_batch(&mut scored, config);
            let mut it = scored.into_iter();
            for r in out.iter_mut().filter(|r| r.is_ok()) {
                *r = Ok(it.next().expect("one normalized record per success"));
            }
        }
        out
    }
}
