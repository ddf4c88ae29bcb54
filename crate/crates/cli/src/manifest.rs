//! Per-stage and per-run manifests with content digests.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::formats::FORMAT_VERSION;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const STAGE_FILE: &str = "stage.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Path relative to the run directory for outputs, as given for inputs.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub stage: String,
    pub tool_version: String,
    pub format_version: u32,
    pub master_seed: u64,
    pub config: RunConfig,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

/// Whole-run manifest assembled by `report`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub format_version: u32,
    pub master_seed: u64,
    pub stages: Vec<StageManifest>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Collects a stage's output files and writes `stage.json` beside them.
pub struct StageWriter {
    run_dir: PathBuf,
    stage: String,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
}

impl StageWriter {
    pub fn new(run_dir: &Path, stage: &str) -> Result<Self> {
        fs::create_dir_all(run_dir.join(stage)).with_context(|| format!("creating {}", run_dir.join(stage).display()))?;
        Ok(Self {
            run_dir: run_dir.to_path_buf(),
            stage: stage.to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, label: &str, path: &Path) -> Result<()> {
        self.inputs.push(FileDigest {
            path: label.to_string(),
            sha256: digest_file(path)?,
        });
        Ok(())
    }

    /// Writes `contents` to `<run>/<stage>/<name>` and records its digest.
    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf> {
        let rel = format!("{}/{name}", self.stage);
        let path = self.run_dir.join(&rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(FileDigest {
            path: rel,
            sha256: sha256_hex(contents.as_bytes()),
        });
        Ok(path)
    }

    pub fn finish(self, config: &RunConfig) -> Result<StageManifest> {
        let manifest = StageManifest {
            stage: self.stage.clone(),
            tool_version: TOOL_VERSION.to_string(),
            format_version: FORMAT_VERSION,
            master_seed: config.analysis.master_seed,
            config: portable(config),
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let path = self.run_dir.join(&self.stage).join(STAGE_FILE);
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}

/// Config snapshot without machine-specific fields, so manifests compare across hosts.
fn portable(config: &RunConfig) -> RunConfig {
    let mut c = config.clone();
    c.workers = 0;
    c.paths.run_dir = PathBuf::from(".");
    c.paths.prices = c.paths.prices.as_ref().and_then(|p| p.file_name()).map(PathBuf::from);
    c.paths.deciles = c.paths.deciles.as_ref().and_then(|p| p.file_name()).map(PathBuf::from);
    c
}

pub fn read_stage(run_dir: &Path, stage: &str) -> Result<StageManifest> {
    let path = run_dir.join(stage).join(STAGE_FILE);
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text)?)
}
