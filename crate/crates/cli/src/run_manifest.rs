use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use bestseller_core::fsutil::write_atomic;

#[derive(Serialize, Debug)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize, Debug)]
pub struct StageTime {
    pub stage: String,
    pub seconds: f64,
}

/// Record of one command run: enough to repeat it exactly.
#[derive(Serialize, Debug)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub tool_version: String,
    /// SHA-256 of `parameters` in canonical JSON.
    pub config_hash: String,
    pub parameters: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub stages: Vec<StageTime>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(hex::encode(Sha256::digest(std::fs::read(path)?)))
}

fn digests(paths: &[PathBuf]) -> std::io::Result<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| Ok(FileDigest { path: p.display().to_string(), sha256: sha256_file(p)? }))
        .collect()
}

pub struct Recorder {
    command: String,
    started_at: String,
    stage_start: Instant,
    stages: Vec<StageTime>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn new(command: &str) -> Self {
        Recorder {
            command: command.into(),
            started_at: chrono::Utc::now().to_rfc3339(),
            stage_start: Instant::now(),
            stages: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    /// Closes the current stage, timing it from the end of the previous one.
    pub fn stage(&mut self, name: &str) {
        self.stages.push(StageTime { stage: name.into(), seconds: self.stage_start.elapsed().as_secs_f64() });
        self.stage_start = Instant::now();
    }

    /// Writes `<out>/<command>.run.json` and returns its path.
    pub fn finish(self, out: &Path, parameters: serde_json::Value) -> std::io::Result<PathBuf> {
        let canonical = serde_json::to_string(&parameters).expect("parameters serialize");
        let manifest = RunManifest {
            command: self.command.clone(),
            argv: std::env::args().collect(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_hash: hex::encode(Sha256::digest(canonical.as_bytes())),
            parameters,
            inputs: digests(&self.inputs)?,
            outputs: digests(&self.outputs)?,
            stages: self.stages,
            started_at: self.started_at,
            finished_at: chrono::Utc::now().to_rfc3339(),
        };
        let path = out.join(format!("{}.run.json", self.command));
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
