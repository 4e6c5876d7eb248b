//! `run.json`: what each command was run with and what it wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const RUN_FILE: &str = "run.json";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub version: String,
    /// Latest invocation of each command, keyed by command name.
    pub commands: BTreeMap<String, CommandRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommandRecord {
    pub seed: u64,
    pub config: RunConfig,
    #[serde(default)]
    pub details: serde_json::Value,
    pub outputs: Vec<OutputFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let bytes = std::fs::read(path)?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

pub fn load(run_dir: &Path) -> anyhow::Result<RunRecord> {
    let path = run_dir.join(RUN_FILE);
    if !path.exists() {
        return Ok(RunRecord::default());
    }
    Ok(serde_json::from_str(&std::fs::read_to_string(&path)?)?)
}

/// Merges one command's entry into `run.json`. Paths are stored relative to
/// the run directory when they live inside it.
pub fn record(
    cfg: &RunConfig,
    command: &str,
    details: serde_json::Value,
    outputs: &[PathBuf],
) -> anyhow::Result<()> {
    std::fs::create_dir_all(&cfg.run_dir)?;
    let mut run = load(&cfg.run_dir)?;
    run.version = env!("CARGO_PKG_VERSION").to_string();
    let mut files = Vec::with_capacity(outputs.len());
    for p in outputs {
        files.push(OutputFile {
            path: p.strip_prefix(&cfg.run_dir).unwrap_or(p).to_path_buf(),
            sha256: sha256_file(p)?,
        });
    }
    run.commands.insert(
        command.to_string(),
        CommandRecord { seed: cfg.seed, config: cfg.clone(), details, outputs: files },
    );
    let mut json = serde_json::to_string_pretty(&run)?;
    json.push('\n');
    std::fs::write(cfg.run_dir.join(RUN_FILE), json)?;
    Ok(())
}
