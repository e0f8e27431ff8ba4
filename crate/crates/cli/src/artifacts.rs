//! Output directory bookkeeping: every file a stage writes is recorded with
//! its SHA-256 in `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the output directory.
    pub file: String,
    pub stage: String,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    /// Period labels in run order.
    pub periods: Vec<String>,
    pub artifacts: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn find(&self, file: &str) -> Option<&ManifestEntry> {
        self.artifacts.iter().find(|a| a.file == file)
    }

    pub fn stages(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for a in &self.artifacts {
            if !out.contains(&a.stage.as_str()) {
                out.push(&a.stage);
            }
        }
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Writes artifacts under one directory and records them.
#[derive(Debug)]
pub struct ArtifactWriter {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl ArtifactWriter {
    pub fn new(dir: impl Into<PathBuf>) -> CliResult<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| CliError::config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir, entries: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.dir.join(file)
    }

    pub fn write(&mut self, stage: &str, file: &str, bytes: impl AsRef<[u8]>) -> CliResult<PathBuf> {
        let bytes = bytes.as_ref();
        let path = self.dir.join(file);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| CliError::stage(stage, e))?;
        }
        fs::write(&path, bytes).map_err(|e| CliError::stage(stage, format!("{}: {e}", path.display())))?;
        self.entries.retain(|e| e.file != file);
        self.entries.push(ManifestEntry { file: file.to_string(), stage: stage.to_string(), checksum: sha256_hex(bytes) });
        Ok(path)
    }

    pub fn write_json<S: Serialize>(&mut self, stage: &str, file: &str, value: &S) -> CliResult<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::stage(stage, e))?;
        text.push('\n');
        self.write(stage, file, text)
    }

    pub fn entries(&self) -> &[ManifestEntry] {
        &self.entries
    }

    /// Writes `manifest.json` and returns the manifest.
    pub fn finish(self, seed: u64, periods: Vec<String>) -> CliResult<Manifest> {
        let manifest = Manifest { seed, periods, artifacts: self.entries };
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::stage("manifest", e))? + "\n";
        let path = self.dir.join(MANIFEST_FILE);
        fs::write(&path, text).map_err(|e| CliError::stage("manifest", format!("{}: {e}", path.display())))?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn rewriting_a_file_replaces_its_entry() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ArtifactWriter::new(dir.path()).unwrap();
        w.write("a", "x.txt", "1").unwrap();
        w.write("a", "sub/y.txt", "2").unwrap();
        w.write("b", "x.txt", "3").unwrap();
        let m = w.finish(7, vec![]).unwrap();
        assert_eq!(m.artifacts.len(), 2);
        assert_eq!(m.find("x.txt").unwrap().stage, "b");
        assert_eq!(Manifest::load(&dir.path().join(MANIFEST_FILE)).unwrap(), m);
        assert_eq!(m.stages(), vec!["a", "b"]);
    }
}
