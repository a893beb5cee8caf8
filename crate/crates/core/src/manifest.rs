//! Run manifests: the configuration text, simulated time span, snapshot
//! index, assumption-flag summary and a SHA-256 checksum for every output.
//!
//! Manifests carry no wall-clock data, so identical runs produce identical
//! manifest bytes.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

/// Manifest of a simulation run; other commands write `<command>.manifest.json`.
pub const MANIFEST_NAME: &str = "manifest.json";

/// Manifest file name used by `command`.
pub fn manifest_name(command: &str) -> String {
    if command.starts_with("run-") {
        MANIFEST_NAME.to_string()
    } else {
        format!("{command}.manifest.json")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub file: String,
    pub step: usize,
    pub time: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagSummary {
    pub windows: usize,
    pub clean: usize,
    pub violations: usize,
    /// Count of windows failing each assumption.
    pub failed: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Configuration text exactly as read.
    pub config: String,
    pub start_time: f64,
    pub end_time: f64,
    pub status: RunStatus,
    pub error: Option<String>,
    pub snapshots: Vec<SnapshotEntry>,
    pub flags: Option<FlagSummary>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn new(command: &str, config: &str) -> Self {
        Self {
            tool: "vortiline".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: config.into(),
            start_time: 0.0,
            end_time: 0.0,
            status: RunStatus::Complete,
            error: None,
            snapshots: Vec::new(),
            flags: None,
            files: Vec::new(),
        }
    }

    /// Records `rel` (relative to `root`) with its checksum.
    pub fn add_file(&mut self, root: &Path, rel: &str) -> Result<()> {
        let bytes = std::fs::read(root.join(rel))?;
        self.files.retain(|f| f.path != rel);
        self.files.push(FileEntry {
            path: rel.to_string(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn file_name(&self) -> String {
        manifest_name(&self.command)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::write(dir.join(self.file_name()), self.to_json())?;
        Ok(())
    }

    /// Reads the manifest `command` wrote into `dir`.
    pub fn read(dir: &Path, command: &str) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(manifest_name(command)))?;
        serde_json::from_str(&text).map_err(|e| Error::Format(format!("manifest: {e}")))
    }

    /// Paths whose current contents differ from the recorded checksum.
    pub fn verify(&self, dir: &Path) -> Result<Vec<String>> {
        let mut bad = Vec::new();
        for f in &self.files {
            match std::fs::read(dir.join(&f.path)) {
                Ok(b) if sha256_hex(&b) == f.sha256 => {}
                _ => bad.push(f.path.clone()),
            }
        }
        Ok(bad)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksums_detect_changes() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        let mut m = RunManifest::new("run-sqg", "model = sqg\n");
        m.add_file(dir.path(), "a.csv").unwrap();
        assert_eq!(m.files[0].sha256, sha256_hex(b"x\n1\n"));
        m.write(dir.path()).unwrap();
        let back = RunManifest::read(dir.path(), "run-sqg").unwrap();
        assert_eq!(back, m);
        assert!(back.verify(dir.path()).unwrap().is_empty());
        std::fs::write(dir.path().join("a.csv"), "x\n2\n").unwrap();
        assert_eq!(back.verify(dir.path()).unwrap(), vec!["a.csv".to_string()]);
    }

    #[test]
    fn names_per_command() {
        assert_eq!(manifest_name("run-euler3d"), "manifest.json");
        assert_eq!(manifest_name("diagnose"), "diagnose.manifest.json");
    }

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
