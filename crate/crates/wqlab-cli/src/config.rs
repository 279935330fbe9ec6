//! JSON experiment configuration: loading, validation, and the run
//! manifest that makes every batch reproducible.
//!
//! A manifest written by a previous run is itself accepted wherever a
//! config is: the loader unwraps its embedded `config` object, so
//! `--config some.manifest.json` reruns the batch byte-identically.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wqlab::{DiscreteMeasure64, ModelMeasure64, Norm, SolverChoice};

use crate::CliError;

/// A batch of experiments sharing one master seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Root of every random stream in the batch. Mandatory: reproducibility
    /// is never silently randomized away.
    pub master_seed: u64,
    /// Worker threads; `--workers` beats this, the `WQLAB_WORKERS`
    /// environment variable is the fallback, and the machine decides
    /// otherwise. Outputs never depend on it.
    #[serde(default)]
    pub workers: Option<usize>,
    pub experiments: Vec<ExperimentEntry>,
}

/// One experiment: a measure, a metric, and whatever the subcommands that
/// will run it need.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentEntry {
    /// Names the experiment's artifacts (`<id>.<subcommand>.csv`).
    pub id: String,
    pub measure: ModelMeasure64,
    pub p: f64,
    pub norm: Norm,
    /// Sample sizes of the Monte Carlo suite (suite subcommands).
    #[serde(default)]
    pub n_values: Vec<usize>,
    /// Replications per sample size (suite subcommands).
    #[serde(default)]
    pub replications: usize,
    /// Transport solver for the suite subcommands.
    #[serde(default)]
    pub solver: Option<SolverChoice>,
    /// `dyadic` subcommand: bound truncation level (defaulted from N, d).
    #[serde(default)]
    pub truncation_level: Option<u32>,
    /// `pierce-check`: moment order of the bound.
    #[serde(default)]
    pub pierce_q: Option<f64>,
    /// `hr-check`: calibrated constant; derived from a uniform-cube trace
    /// when absent.
    #[serde(default)]
    pub kappa_hat: Option<f64>,
    /// `quantize-opt`: optimizer parameters.
    #[serde(default)]
    pub quantizer: Option<QuantizerConfig>,
    /// `exact`: the two discrete measures to compare.
    #[serde(default)]
    pub exact_pair: Option<ExactPair>,
}

/// Parameters of the Lloyd-type optimizer run by `quantize-opt`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizerConfig {
    /// Codebook size.
    pub n: usize,
    /// Monte Carlo cloud size (must be at least `100·n`).
    pub sample_size: usize,
    pub restarts: usize,
    pub iters: usize,
}

/// Inline discrete measure pair for the `exact` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactPair {
    pub mu: DiscreteMeasure64,
    pub nu: DiscreteMeasure64,
}

/// Record of a completed run: the exact config, its hash, and every file
/// written. Accepted back as a config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub config: RunConfig,
    /// SHA-256 (hex) of the canonical JSON serialization of `config`.
    pub config_sha256: String,
    pub master_seed: u64,
    pub versions: BTreeMap<String, String>,
    pub out_files: Vec<String>,
}

/// Hex SHA-256 of the canonical (compact JSON) form of the config.
pub fn config_sha256(config: &RunConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

pub fn build_manifest(command: &str, config: &RunConfig, out_files: Vec<String>) -> Manifest {
    let mut versions = BTreeMap::new();
    versions.insert("wqlab".to_string(), wqlab::VERSION.to_string());
    versions.insert("wqlab-cli".to_string(), env!("CARGO_PKG_VERSION").to_string());
    Manifest {
        command: command.to_string(),
        config: config.clone(),
        config_sha256: config_sha256(config),
        master_seed: config.master_seed,
        versions,
        out_files,
    }
}

/// Reads a config (or a previous run's manifest) from `path`, with field
/// path and line diagnostics on every failure mode.
pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
        CliError::Config(format!(
            "{}: invalid JSON at line {}, column {}: {e}",
            path.display(),
            e.line(),
            e.column()
        ))
    })?;
    // A manifest wraps the config it ran with; unwrap it transparently.
    let config_value = match &value {
        serde_json::Value::Object(map)
            if map.contains_key("config") && map.contains_key("config_sha256") =>
        {
            map["config"].clone()
        }
        _ => value,
    };
    let config: RunConfig = serde_path_to_error::deserialize(config_value).map_err(|e| {
        CliError::Config(format!(
            "{}: config field `{}`: {}",
            path.display(),
            e.path(),
            e.inner()
        ))
    })?;
    validate(&config)?;
    Ok(config)
}

fn validate(config: &RunConfig) -> Result<(), CliError> {
    if config.experiments.is_empty() {
        return Err(CliError::Config("config defines no experiments".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for entry in &config.experiments {
        if entry.id.is_empty() {
            return Err(CliError::Config("experiment id must be non-empty".into()));
        }
        if entry.id.contains(['/', '\\']) || entry.id.contains(char::is_whitespace) {
            return Err(CliError::Config(format!(
                "experiment id `{}` must not contain path separators or whitespace",
                entry.id
            )));
        }
        if !seen.insert(entry.id.as_str()) {
            return Err(CliError::Config(format!(
                "experiment id `{}` is defined more than once",
                entry.id
            )));
        }
        entry.measure.validate().map_err(|e| {
            CliError::Config(format!("experiment `{}`: measure: {e}", entry.id))
        })?;
        if !entry.p.is_finite() || entry.p < 1.0 {
            return Err(CliError::Config(format!(
                "experiment `{}`: p = {} must be a finite number ≥ 1",
                entry.id, entry.p
            )));
        }
    }
    Ok(())
}
