//! Run manifests: every output bundle records the exact configuration, a
//! content checksum per file, and timings, so a bundle can be verified
//! before ingestion and a run can be reproduced bit for bit.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub crate_version: String,
    pub config_sha256: String,
    /// Full serialized configuration (every default made explicit).
    pub config_toml: String,
    pub seed: u64,
    pub files: Vec<FileEntry>,
    /// Wall-clock timings per phase, seconds. Excluded from reproducibility
    /// comparisons.
    pub timings_s: Vec<(String, f64)>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

impl RunManifest {
    pub fn new(command: &str, config_toml: String, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(config_toml.as_bytes()),
            config_toml,
            seed,
            files: Vec::new(),
            timings_s: Vec::new(),
        }
    }

    /// Register a produced file (path relative to the bundle directory).
    pub fn add_file(&mut self, dir: &Path, rel: &str) -> std::io::Result<()> {
        let full = dir.join(rel);
        let bytes = fs::metadata(&full)?.len();
        self.files.push(FileEntry { path: rel.to_string(), sha256: sha256_file(&full)?, bytes });
        Ok(())
    }

    pub fn add_timing(&mut self, phase: &str, seconds: f64) {
        self.timings_s.push((phase.to_string(), seconds));
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(self).expect("manifest serializes"))?;
        Ok(path)
    }

    pub fn load(dir: &Path) -> std::io::Result<Self> {
        let text = fs::read_to_string(dir.join("manifest.json"))?;
        serde_json::from_str(&text)
            .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    /// Verify every listed checksum; returns the first mismatch.
    pub fn verify(&self, dir: &Path) -> std::io::Result<Result<(), String>> {
        for f in &self.files {
            let full = dir.join(&f.path);
            if !full.exists() {
                return Ok(Err(format!("missing file {}", f.path)));
            }
            let got = sha256_file(&full)?;
            if got != f.sha256 {
                return Ok(Err(format!("checksum mismatch for {}", f.path)));
            }
        }
        Ok(Ok(()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_round_trip_and_tamper_detection() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("data.csv"), "a,b\n1,2\n").unwrap();
        let mut m = RunManifest::new("spectrum", "x = 1".into(), 42);
        m.add_file(dir.path(), "data.csv").unwrap();
        m.write(dir.path()).unwrap();

        let loaded = RunManifest::load(dir.path()).unwrap();
        assert!(loaded.verify(dir.path()).unwrap().is_ok());

        fs::write(dir.path().join("data.csv"), "a,b\n1,3\n").unwrap();
        assert!(loaded.verify(dir.path()).unwrap().is_err());
    }
}
