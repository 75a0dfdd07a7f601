use crate::datamodel::QcReport;
use crate::error::{FdaError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
    /// Not attempted because an input stage failed.
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: String,
    pub status: StageStatus,
    pub error: Option<String>,
    pub exit_code: Option<i32>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// File name relative to the output directory.
    pub name: String,
    pub stage: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Run record written next to the artifacts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub qc_report: Option<QcReport>,
    pub stages: Vec<StageRecord>,
    pub artifacts: Vec<ArtifactEntry>,
}

impl Manifest {
    pub fn all_ok(&self) -> bool {
        self.stages.iter().all(|s| s.status == StageStatus::Ok)
    }

    /// Exit code of the first failed stage, 0 when every stage succeeded.
    pub fn exit_code(&self) -> i32 {
        self.stages
            .iter()
            .find(|s| s.status != StageStatus::Ok)
            .map(|s| s.exit_code.unwrap_or(1))
            .unwrap_or(0)
    }

    pub fn artifact(&self, name: &str) -> Option<&ArtifactEntry> {
        self.artifacts.iter().find(|a| a.name == name)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Artifacts buffered in memory; nothing touches the output directory
/// until [`Outputs::commit`].
#[derive(Debug)]
pub struct Outputs {
    files: Vec<(String, Vec<u8>)>,
    pub manifest: Manifest,
}

impl Outputs {
    pub fn new(command: &str, config_sha256: String, seed: Option<u64>) -> Self {
        Outputs {
            files: Vec::new(),
            manifest: Manifest {
                tool: env!("CARGO_PKG_NAME").to_string(),
                version: env!("CARGO_PKG_VERSION").to_string(),
                command: command.to_string(),
                config_sha256,
                seed,
                qc_report: None,
                stages: Vec::new(),
                artifacts: Vec::new(),
            },
        }
    }

    /// Buffer one artifact produced by `write`.
    pub fn add<F>(&mut self, name: &str, stage: &str, write: F) -> Result<()>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<()>,
    {
        if self.files.iter().any(|(n, _)| n == name) {
            return Err(FdaError::Config(format!("artifact `{name}` written twice")));
        }
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.manifest.artifacts.push(ArtifactEntry {
            name: name.to_string(),
            stage: stage.to_string(),
            sha256: hex::encode(Sha256::digest(&buf)),
            bytes: buf.len(),
        });
        self.files.push((name.to_string(), buf));
        Ok(())
    }

    pub fn add_json<T: Serialize>(&mut self, name: &str, stage: &str, value: &T) -> Result<()> {
        self.add(name, stage, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            w.push(b'\n');
            Ok(())
        })
    }

    pub fn stage(&mut self, name: &str, outcome: std::result::Result<(), &FdaError>) {
        let (status, error, exit_code) = match outcome {
            Ok(()) => (StageStatus::Ok, None, None),
            Err(e) => (StageStatus::Failed, Some(e.to_string()), Some(e.exit_code())),
        };
        self.manifest.stages.push(StageRecord {
            name: name.to_string(),
            status,
            error,
            exit_code,
        });
    }

    pub fn skip(&mut self, name: &str, reason: &str, exit_code: i32) {
        self.manifest.stages.push(StageRecord {
            name: name.to_string(),
            status: StageStatus::Skipped,
            error: Some(reason.to_string()),
            exit_code: Some(exit_code),
        });
    }

    /// Write every buffered artifact and the manifest.
    pub fn commit(self, dir: &Path) -> Result<Manifest> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(self.manifest)
    }
}
