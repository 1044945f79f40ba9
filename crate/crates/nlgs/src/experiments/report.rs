//! Experiment artifacts: a CSV and a JSON summary whose names carry a hash
//! of the configuration that produced them.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::grid::write_atomic;

/// First 16 hex digits of the SHA-256 of the JSON form of `config`.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let bytes = serde_json::to_vec(config)?;
    let digest = Sha256::digest(&bytes);
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Assertion {
    pub name: String,
    pub passed: bool,
    /// Tolerance or threshold the check used, if numeric.
    pub tolerance: Option<f64>,
    pub detail: String,
}

impl Assertion {
    pub fn new(
        name: impl Into<String>,
        passed: bool,
        tolerance: Option<f64>,
        detail: impl Into<String>,
    ) -> Self {
        Assertion {
            name: name.into(),
            passed,
            tolerance,
            detail: detail.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub config_hash: String,
    pub passed: bool,
    pub assertions: Vec<Assertion>,
}

impl Summary {
    pub fn new(
        experiment: impl Into<String>,
        config_hash: String,
        assertions: Vec<Assertion>,
    ) -> Self {
        let passed = assertions.iter().all(|a| a.passed);
        Summary {
            experiment: experiment.into(),
            config_hash,
            passed,
            assertions,
        }
    }
}

/// Write `<name>-<hash>.csv` and `<name>-<hash>.json` into `dir`.
pub fn write_artifacts(dir: &Path, summary: &Summary, csv: &str) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir)?;
    let stem = format!("{}-{}", summary.experiment, summary.config_hash);
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    write_atomic(&csv_path, csv.as_bytes())?;
    let mut json = serde_json::to_string_pretty(summary)?;
    json.push('\n');
    write_atomic(&json_path, json.as_bytes())?;
    Ok((csv_path, json_path))
}
