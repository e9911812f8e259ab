//! Configuration-driven experiment runs.
//!
//! A run is parsed, fully validated into a [`Plan`], executed in memory and
//! only then written out, so a rejected configuration never leaves partial
//! artifacts behind.

mod config;
mod scenario;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

pub use config::*;
pub use scenario::Plan;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Rejected configuration, naming the offending key and its line.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub line: Option<usize>,
    pub reason: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config error at line {line}: `{}`: {}", self.key, self.reason),
            None => write!(f, "config error: `{}`: {}", self.key, self.reason),
        }
    }
}

impl std::error::Error for ConfigError {}

/// Failure of a validated run.
#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Runtime(crate::Error),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => e.fmt(f),
            RunError::Runtime(e) => write!(f, "run failed: {e}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<crate::Error> for RunError {
    fn from(e: crate::Error) -> Self {
        RunError::Runtime(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Runtime(e.into())
    }
}

/// Parsed configuration together with the text it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: ExperimentConfig,
    source: String,
    overridden: Vec<String>,
}

impl LoadedConfig {
    /// Line of `key` (dotted path) in the source, unless it was overridden.
    pub fn line_of(&self, key: &str) -> Option<usize> {
        if self.overridden.iter().any(|k| k == key) {
            return None;
        }
        locate(&self.source, key)
    }

    /// Apply a command-line override to `key`.
    pub fn override_value(&mut self, key: &str, set: impl FnOnce(&mut ExperimentConfig)) {
        set(&mut self.config);
        self.overridden.push(key.to_string());
    }

    pub fn error(&self, key: &str, reason: impl fmt::Display) -> ConfigError {
        ConfigError {
            key: key.to_string(),
            line: self.line_of(key),
            reason: reason.to_string(),
        }
    }
}

fn line_at(source: &str, offset: usize) -> usize {
    source[..offset.min(source.len())].matches('\n').count() + 1
}

/// 1-based line on which the dotted `key` is assigned.
fn locate(source: &str, key: &str) -> Option<usize> {
    let mut table = String::new();
    for (i, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            table = header.trim().to_string();
            continue;
        }
        let Some((lhs, _)) = line.split_once('=') else {
            continue;
        };
        let lhs = lhs.trim();
        let full = if table.is_empty() { lhs.to_string() } else { format!("{table}.{lhs}") };
        if full == key {
            return Some(i + 1);
        }
    }
    None
}

fn toml_error(source: &str, e: toml::de::Error) -> ConfigError {
    let message = e.message().to_string();
    let key = message
        .split('`')
        .nth(1)
        .map(str::to_string)
        .unwrap_or_else(|| "<document>".into());
    ConfigError {
        key,
        line: e.span().map(|s| line_at(source, s.start)),
        reason: message,
    }
}

fn parse_override_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Parse `source` and apply `key=value` overrides (dotted keys, TOML values).
pub fn load_config(source: &str, overrides: &[(String, String)]) -> Result<LoadedConfig, ConfigError> {
    let _: ExperimentConfig = toml::from_str(source).map_err(|e| toml_error(source, e))?;
    let mut table: toml::Table = toml::from_str(source).map_err(|e| toml_error(source, e))?;
    let mut overridden = Vec::new();
    for (key, raw) in overrides {
        let parts: Vec<&str> = key.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(ConfigError {
                key: key.clone(),
                line: None,
                reason: "malformed key".into(),
            });
        }
        let mut node = &mut table;
        for part in &parts[..parts.len() - 1] {
            let entry = node
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            node = entry.as_table_mut().ok_or_else(|| ConfigError {
                key: key.clone(),
                line: None,
                reason: format!("`{part}` is not a table"),
            })?;
        }
        node.insert(parts[parts.len() - 1].to_string(), parse_override_value(raw));
        overridden.push(key.clone());
    }
    let config = ExperimentConfig::deserialize_table(table).map_err(|e| ConfigError {
        key: e.message().split('`').nth(1).unwrap_or("--set").to_string(),
        line: None,
        reason: format!("{} (after --set overrides)", e.message()),
    })?;
    Ok(LoadedConfig {
        config,
        source: source.to_string(),
        overridden,
    })
}

impl ExperimentConfig {
    fn deserialize_table(table: toml::Table) -> Result<Self, toml::de::Error> {
        let text = toml::to_string(&table).expect("a parsed table re-serializes");
        toml::from_str(&text)
    }

    /// Effective configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// One output file.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(&self.bytes))
    }
}

/// Result of executing a plan, before anything is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub scenario: Scenario,
    pub summary: Vec<(String, String)>,
    pub artifacts: Vec<Artifact>,
    /// Failed scenario assertions; a nonempty list fails the run.
    pub failures: Vec<String>,
}

impl Outcome {
    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.summary {
            s.push_str(&format!("{k} = {v}\n"));
        }
        s.push_str(&format!("status = {}\n", if self.failures.is_empty() { "ok" } else { "failed" }));
        for (i, f) in self.failures.iter().enumerate() {
            s.push_str(&format!("failure.{i} = {f}\n"));
        }
        s
    }

    pub fn value(&self, key: &str) -> Option<&str> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Config echo, artifact digests, wall time and library version of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub out_dir: PathBuf,
    /// `(file name, sha256 hex)` for every artifact and the summary.
    pub artifacts: Vec<(String, String)>,
    pub wall_time: Duration,
    pub version: &'static str,
    pub threads: usize,
    pub failures: Vec<String>,
}

impl RunManifest {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("version = {}\n", self.version));
        s.push_str(&format!("threads = {}\n", self.threads));
        s.push_str(&format!("wall_time_s = {:.6}\n", self.wall_time.as_secs_f64()));
        s.push_str(&format!("status = {}\n", if self.succeeded() { "ok" } else { "failed" }));
        for (name, digest) in &self.artifacts {
            s.push_str(&format!("sha256.{name} = {digest}\n"));
        }
        s.push_str("\n# effective configuration\n");
        for line in self.config.to_toml().lines() {
            s.push_str(&format!("# {line}\n"));
        }
        s
    }
}

/// Validate, execute and write one run into `out_dir`.
///
/// The output directory is created only after validation succeeds.
pub fn run_experiment(loaded: &LoadedConfig, scenario: Scenario, out_dir: &Path) -> Result<RunManifest, RunError> {
    let started = Instant::now();
    let plan = Plan::prepare(loaded, scenario)?;
    let outcome = plan.execute()?;
    let manifest = write_outcome(&loaded.config, &outcome, out_dir, started)?;
    Ok(manifest)
}

fn write_outcome(
    config: &ExperimentConfig,
    outcome: &Outcome,
    out_dir: &Path,
    started: Instant,
) -> Result<RunManifest, RunError> {
    fs::create_dir_all(out_dir)?;
    let mut digests = Vec::new();
    let summary = Artifact {
        name: "summary.txt".into(),
        bytes: outcome.summary_text().into_bytes(),
    };
    for a in outcome.artifacts.iter().chain(std::iter::once(&summary)) {
        fs::write(out_dir.join(&a.name), &a.bytes)?;
        digests.push((a.name.clone(), a.digest()));
    }
    let manifest = RunManifest {
        config: config.clone(),
        out_dir: out_dir.to_path_buf(),
        artifacts: digests,
        wall_time: started.elapsed(),
        version: VERSION,
        threads: rayon::current_num_threads(),
        failures: outcome.failures.clone(),
    };
    fs::write(out_dir.join("manifest.txt"), manifest.to_text())?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn locate_finds_section_keys() {
        let src = "seed = 3\n\n[perturb]\ndelta = 0.1\n epsilon = 0.2\n[system.towerize]\ndelta = 1\n";
        assert_eq!(locate(src, "seed"), Some(1));
        assert_eq!(locate(src, "perturb.delta"), Some(4));
        assert_eq!(locate(src, "perturb.epsilon"), Some(5));
        assert_eq!(locate(src, "system.towerize.delta"), Some(7));
        assert_eq!(locate(src, "nothing"), None);
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let src = "seed = 1\n[perturb]\ndelta = 0.1\nepsilon = 0.1\ndleta = 3\n";
        let e = load_config(src, &[]).unwrap_err();
        assert_eq!(e.line, Some(5));
        assert!(e.reason.contains("dleta"), "{e}");
    }

    #[test]
    fn overrides_apply_and_are_typed() {
        let src = "seed = 1\n[perturb]\ndelta = 0.1\nepsilon = 0.1\n";
        let sets = vec![("perturb.delta".to_string(), "0.25".to_string()), ("seed".to_string(), "9".to_string())];
        let cfg = load_config(src, &sets).unwrap();
        assert_eq!(cfg.config.seed, 9);
        assert_eq!(cfg.config.perturb.as_ref().unwrap().delta, 0.25);
        assert_eq!(cfg.line_of("perturb.delta"), None);
        assert_eq!(cfg.line_of("perturb.epsilon"), Some(4));
        let bad = vec![("perturb.nope".to_string(), "1".to_string())];
        assert!(load_config(src, &bad).is_err());
    }
}
