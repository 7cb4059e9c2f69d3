//! Run manifest: what was run, how long each stage took, and a checksum per emitted file.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileEntry {
    /// Relative to the output directory.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub verb: String,
    /// SHA-256 of the canonical (compact) JSON form of the effective config.
    pub config_hash: String,
    pub seed: u64,
    pub timings: Vec<StageTiming>,
    /// Every file written by the run except the manifest itself, sorted by path.
    pub files: Vec<FileEntry>,
    /// All requested stages finished.
    pub complete: bool,
    /// Hard invariant suites of the run all passed.
    pub invariants_passed: bool,
    /// Stages that failed, with the error; their outputs may be missing or partial.
    pub failures: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(verb: &str, config_json: &str, seed: u64) -> Self {
        RunManifest {
            artifact: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            verb: verb.into(),
            config_hash: sha256_hex(config_json.as_bytes()),
            seed,
            timings: Vec::new(),
            files: Vec::new(),
            complete: true,
            invariants_passed: true,
            failures: Vec::new(),
        }
    }

    pub fn record_file(&mut self, path: &str, contents: &[u8]) {
        self.files.push(FileEntry { path: path.into(), bytes: contents.len() as u64, sha256: sha256_hex(contents) });
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
    }

    /// Re-hashes every listed file under `dir`; returns the paths that are missing or differ.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| std::fs::read(dir.join(&f.path)).map_or(true, |b| sha256_hex(&b) != f.sha256))
            .map(|f| f.path.clone())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises") + "\n"
    }
}
