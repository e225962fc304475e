//! `pa-reward` command-line interface and reward service.

pub mod config;
pub mod service;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::{apply_limits, resolve_reward, FileConfig};
use pa_reward::detectors::{DetectError, DetectorRegistry};
use pa_reward::eval::{evaluate_corpus, render_report, ReportFormat};
use pa_reward::exec::{Harness, ResourceLimits};
use pa_reward::finding::{CweId, Finding};
use pa_reward::maintainability::maintainability_verdict;
use pa_reward::reward::{RewardError, RewardOverrides, Scorer};
use pa_reward::task::{load_candidates, load_task_corpus, CandidateProgram, TaskSpec};
use serde_json::json;
use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "pa-reward", version, about = "Program-analysis rewards for code-generation RL")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "PA_REWARD_CONFIG")]
    pub config: Option<PathBuf>,
    /// Weight of the quality reward in [0, 1].
    #[arg(long, global = true, env = "PA_REWARD_ALPHA")]
    pub alpha: Option<f64>,
    /// Add batch-normalized rewards to score output.
    #[arg(long, global = true, env = "PA_REWARD_NORMALIZE", num_args = 0..=1, default_missing_value = "true")]
    pub normalize: Option<bool>,
    /// Directory of extra rule packs (*.toml); they shadow built-ins with the same CWE.
    #[arg(long, global = true, env = "PA_REWARD_RULEPACK_DIR")]
    pub rulepack_dir: Option<PathBuf>,
    /// Per-test limits, e.g. `timeout=5000,memory=512M,output=1M,file=64M`.
    #[arg(long, global = true, env = "PA_REWARD_LIMITS")]
    pub limits: Option<String>,
    /// Concurrent sandboxed tests.
    #[arg(long, global = true, env = "PA_REWARD_WORKERS")]
    pub workers: Option<usize>,
    /// Output format.
    #[arg(long, global = true, env = "PA_REWARD_FORMAT", value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    TableText,
    Structured,
}

impl From<Format> for ReportFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::TableText => ReportFormat::TableText,
            Format::Structured => ReportFormat::Structured,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Report findings for one source file. Exit 0 when clean, 1 with findings, 2 on error.
    Detect(DetectArgs),
    /// Score candidates; one reward record per candidate on stdout, summary on stderr.
    Score(CorpusArgs),
    /// Evaluate one candidate per task and print functionality/quality/joint pass rates.
    Eval(EvalArgs),
    /// Run the HTTP reward endpoint.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    pub file: PathBuf,
    /// CWE ids to check (e.g. CWE-89,CWE-78); all built-in packs when omitted.
    #[arg(long, value_delimiter = ',', conflicts_with = "maintainability")]
    pub cwe: Vec<CweId>,
    /// Run the maintainability checks instead of the CWE detectors.
    #[arg(long)]
    pub maintainability: bool,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Task corpus (line-delimited JSON).
    #[arg(long)]
    pub tasks: PathBuf,
    /// Candidate programs (line-delimited JSON).
    #[arg(long)]
    pub candidates: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,
    /// Also write the structured report to this file.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Task corpus preloaded at startup.
    #[arg(long)]
    pub tasks: PathBuf,
    /// Address to listen on (default 127.0.0.1:8750).
    #[arg(long, env = "PA_REWARD_BIND")]
    pub bind: Option<String>,
    /// Largest accepted batch.
    #[arg(long)]
    pub max_batch: Option<usize>,
}

/// Settings shared by every command after precedence resolution.
pub struct Settings {
    pub file: FileConfig,
    pub cli_overrides: RewardOverrides,
    pub limits: ResourceLimits,
    pub rulepack_dir: Option<PathBuf>,
    pub format: Format,
}

impl Cli {
    pub fn settings(&self) -> Result<Settings> {
        let file = match &self.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let mut limits = file.limits.clone().unwrap_or_default();
        if let Some(spec) = &self.limits {
            limits = apply_limits(spec, limits)?;
        }
        if let Some(w) = self.workers.or(file.workers) {
            limits.workers = w.max(1);
        }
        Ok(Settings {
            cli_overrides: RewardOverrides { alpha: self.alpha, normalize: self.normalize, ..Default::default() },
            rulepack_dir: self.rulepack_dir.clone().or_else(|| file.rulepack_dir.clone()),
            format: self.format.unwrap_or(Format::TableText),
            limits,
            file,
        })
    }
}

impl Settings {
    pub fn registry(&self) -> Result<DetectorRegistry> {
        Ok(match &self.rulepack_dir {
            Some(dir) => DetectorRegistry::with_extensions(dir)?,
            None => DetectorRegistry::builtin(),
        })
    }

    pub fn scorer(&self) -> Result<Scorer> {
        let config = resolve_reward(&self.file.reward, &RewardOverrides::default(), &self.cli_overrides);
        log::info!("reward config {config:?}; limits {:?}", self.limits);
        Ok(Scorer::new(self.registry()?, Harness::new(self.limits.clone())?, config)?)
    }
}

/// Runs the command and returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = cli.settings().and_then(|s| match &cli.command {
        Command::Detect(a) => cmd_detect(a, &s, out),
        Command::Score(a) => cmd_score(a, &s, out, err),
        Command::Eval(a) => cmd_eval(a, &s, out),
        Command::Serve(a) => cmd_serve(a, &s),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            2
        }
    }
}

fn print_findings(path: &Path, findings: &[Finding], format: Format, out: &mut dyn Write) -> Result<()> {
    let name = path.display().to_string();
    for f in findings {
        match format {
            Format::Structured => writeln!(out, "{}", serde_json::to_string(&f.to_record(&name))?)?,
            Format::TableText => {
                let tag = f.cwe_id.map_or_else(|| f.kind.as_str().to_string(), |c| c.to_string());
                writeln!(out, "{name}:{}:{}: {tag}: {}", f.span.line, f.span.col, f.message)?;
                for h in f.evidence.hops() {
                    if !h.note.is_empty() {
                        writeln!(out, "    {}:{}: {} ({})", h.line, h.col, h.text, h.note)?;
                    }
                }
            }
        }
    }
    Ok(())
}

pub fn cmd_detect(args: &DetectArgs, s: &Settings, out: &mut dyn Write) -> Result<i32> {
    let source = std::fs::read_to_string(&args.file).with_context(|| format!("reading {}", args.file.display()))?;
    let findings = if args.maintainability {
        maintainability_verdict(&source).map_err(DetectError::from)?.findings
    } else {
        let registry = s.registry()?;
        let tags = if args.cwe.is_empty() { registry.known_ids() } else { args.cwe.clone() };
        pa_reward::detectors::detect_source(&source, &tags, &registry)?
    };
    print_findings(&args.file, &findings, s.format, out)?;
    Ok(i32::from(!findings.is_empty()))
}

fn load_corpus(args: &CorpusArgs) -> Result<(Vec<TaskSpec>, Vec<CandidateProgram>)> {
    Ok((load_task_corpus(&args.tasks)?, load_candidates(&args.candidates)?))
}

pub fn cmd_score(args: &CorpusArgs, s: &Settings, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let (tasks, candidates) = load_corpus(args)?;
    let scorer = s.scorer()?;
    let by_id: HashMap<&str, &TaskSpec> = tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
    let jobs: Vec<(&CandidateProgram, &TaskSpec)> =
        candidates.iter().filter_map(|c| by_id.get(c.task_id.as_str()).map(|t| (c, *t))).collect();
    let mut scored = scorer.score_batch(&jobs, &scorer.config).into_iter();

    let (mut total, mut count, mut penalties, mut errors) = (0.0, 0usize, 0usize, 0usize);
    if s.format == Format::TableText && !candidates.is_empty() {
        writeln!(out, "{:<28}{:<18}{:>4}{:>9}{:>9}{:>9}  tests", "candidate", "task", "r_q", "r_f", "r_h", "runnable")?;
    }
    for c in &candidates {
        let result = match by_id.get(c.task_id.as_str()) {
            None => Err(RewardError::UnknownTask { candidate_id: c.candidate_id.clone(), task_id: c.task_id.clone() }),
            Some(_) => scored.next().expect("one result per job"),
        };
        match result {
            Ok(b) => {
                count += 1;
                total += b.r_hybrid;
                penalties += usize::from(!b.runnable);
                match s.format {
                    Format::Structured => writeln!(out, "{}", serde_json::to_string(&b)?)?,
                    Format::TableText => writeln!(
                        out,
                        "{:<28}{:<18}{:>4}{:>9.4}{:>9.4}{:>9}  {}/{}",
                        b.candidate_id, b.task_id, b.r_quality, b.r_function, b.r_hybrid, b.runnable, b.tests_passed,
                        b.tests_total
                    )?,
                }
            }
            Err(e) => {
                errors += 1;
                let rec = json!({
                    "candidate_id": c.candidate_id,
                    "task_id": c.task_id,
                    "error": {"kind": e.kind(), "message": e.to_string()},
                });
                match s.format {
                    Format::Structured => writeln!(out, "{rec}")?,
                    Format::TableText => writeln!(out, "{:<28}{:<18}error: {e}", c.candidate_id, c.task_id)?,
                }
            }
        }
    }
    let mean = if count > 0 { total / count as f64 } else { 0.0 };
    writeln!(err, "summary: {count} scored, mean reward {mean:.4}, {penalties} penalties, {errors} errors")?;
    Ok(if errors > 0 { 2 } else { 0 })
}

pub fn cmd_eval(args: &EvalArgs, s: &Settings, out: &mut dyn Write) -> Result<i32> {
    let (tasks, candidates) = load_corpus(&args.corpus)?;
    let report = evaluate_corpus(&tasks, &candidates, &s.scorer()?)?;
    if let Some(path) = &args.output {
        std::fs::write(path, render_report(&report, ReportFormat::Structured))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    write!(out, "{}", render_report(&report, s.format.into()))?;
    Ok(0)
}

pub fn cmd_serve(args: &ServeArgs, s: &Settings) -> Result<i32> {
    let tasks = load_task_corpus(&args.tasks)?;
    let mut limits = s.file.service.clone();
    if let Some(b) = &args.bind {
        limits.bind = b.clone();
    }
    if let Some(m) = args.max_batch {
        limits.max_batch = m;
    }
    let scorer = s.scorer()?;
    log::info!(
        "config precedence: flags {:?} > request > file {:?} > defaults",
        s.cli_overrides,
        s.file.reward
    );
    let state = service::ServiceState::new(scorer, tasks, s.file.reward, s.cli_overrides, limits.clone());
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&limits.bind).await?;
        log::info!("listening on {}", listener.local_addr()?);
        eprintln!("listening on {}", listener.local_addr()?);
        service::serve(listener, state, service::shutdown_signal()).await?;
        anyhow::Ok(())
    })?;
    Ok(0)
}
