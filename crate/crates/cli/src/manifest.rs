use std::path::{Path, PathBuf};
use std::time::Instant;

use han_ddi::io::write_atomic;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Collects what a command read and wrote; written as `manifest.json` in the
/// command's output directory once everything else has been written.
pub struct Manifest {
    command: String,
    started: Instant,
    inputs: Vec<(PathBuf, String)>,
    artifacts: Vec<(PathBuf, String)>,
    extra: Map<String, Value>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        Manifest {
            command: command.to_string(),
            started: Instant::now(),
            inputs: Vec::new(),
            artifacts: Vec::new(),
            extra: Map::new(),
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        if !self.inputs.iter().any(|(p, _)| p == path) {
            self.inputs.push((path.to_path_buf(), sha256_hex(bytes)));
        }
    }

    /// Writes `bytes` atomically and records the digest.
    pub fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<(), CliError> {
        write_atomic(path, bytes)?;
        self.artifacts.push((path.to_path_buf(), sha256_hex(bytes)));
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: Value) {
        self.extra.insert(key.to_string(), value);
    }

    pub fn finish(self, dir: &Path, config: &RunConfig) -> Result<PathBuf, CliError> {
        let files = |list: &[(PathBuf, String)]| -> Vec<Value> {
            list.iter()
                .map(|(p, d)| json!({ "path": p.display().to_string(), "sha256": d }))
                .collect()
        };
        let mut doc = json!({
            "command": self.command,
            "seed": config.seed,
            "config": config.echo(),
            "inputs": files(&self.inputs),
            "artifacts": files(&self.artifacts),
            "duration_seconds": self.started.elapsed().as_secs_f64(),
        });
        doc.as_object_mut().expect("object").extend(self.extra);
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&doc).expect("manifest serializes") + "\n";
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }
}
