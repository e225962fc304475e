//! Configuration file, `--limits` parsing and precedence resolution.

use anyhow::{bail, Context, Result};
use pa_reward::exec::ResourceLimits;
use pa_reward::reward::{RewardConfig, RewardOverrides};
use serde::Deserialize;
use std::path::{Path, PathBuf};

/// TOML configuration file. Every section is optional.
///
/// ```toml
/// rulepack_dir = "rules"
/// workers = 8
///
/// [reward]
/// alpha = 0.5
/// normalize = false
///
/// [limits]
/// wall_timeout_ms = 10000
/// max_output_bytes = 1048576
///
/// [service]
/// bind = "127.0.0.1:8750"
/// max_batch = 256
/// ```
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub reward: RewardOverrides,
    pub limits: Option<ResourceLimits>,
    pub rulepack_dir: Option<PathBuf>,
    pub workers: Option<usize>,
    #[serde(default)]
    pub service: ServiceConfig,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub bind: String,
    /// Largest number of items accepted in one batch.
    pub max_batch: usize,
    /// Batches scored at the same time.
    pub max_in_flight: usize,
    /// Batches allowed to wait for a scoring slot before requests are refused.
    pub max_queue: usize,
    pub max_body_bytes: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8750".into(),
            max_batch: 256,
            max_in_flight: 2,
            max_queue: 16,
            max_body_bytes: 64 << 20,
        }
    }
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

fn parse_size(v: &str) -> Result<u64> {
    let v = v.trim();
    let (digits, mult) = match v.char_indices().last() {
        Some((i, 'k' | 'K')) => (&v[..i], 1u64 << 10),
        Some((i, 'm' | 'M')) => (&v[..i], 1 << 20),
        Some((i, 'g' | 'G')) => (&v[..i], 1 << 30),
        _ => (v, 1),
    };
    let n: u64 = digits.parse().with_context(|| format!("invalid size {v:?}"))?;
    n.checked_mul(mult).with_context(|| format!("size {v:?} overflows"))
}

/// Applies a `--limits` spec such as `timeout=5000,memory=512M,output=1M,file=64M`
/// (timeout in milliseconds; sizes take K/M/G suffixes).
pub fn apply_limits(spec: &str, mut limits: ResourceLimits) -> Result<ResourceLimits> {
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let Some((key, value)) = part.split_once('=') else {
            bail!("expected key=value in --limits, got {part:?}");
        };
        match key.trim() {
            "timeout" => {
                limits.wall_timeout_ms = value.trim().parse().with_context(|| format!("invalid timeout {value:?}"))?
            }
            "memory" => limits.max_memory_bytes = parse_size(value)?,
            "output" => limits.max_output_bytes = usize::try_from(parse_size(value)?)?,
            "file" => limits.max_file_bytes = parse_size(value)?,
            other => bail!("unknown limit {other:?} (expected timeout, memory, output or file)"),
        }
    }
    if limits.wall_timeout_ms == 0 {
        bail!("timeout must be positive");
    }
    Ok(limits)
}

/// Effective reward configuration for one scoring request:
/// command-line flags over request overrides over the file over defaults.
pub fn resolve_reward(file: &RewardOverrides, request: &RewardOverrides, cli: &RewardOverrides) -> RewardConfig {
    RewardConfig::default().with(file).with(request).with(cli)
}
