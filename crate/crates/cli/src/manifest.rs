//! Run manifest: what was run, from which inputs, and a checksum for every
//! file the run wrote.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{self, CliError};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the results directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replication {
    pub seed: u64,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub tool_version: String,
    pub schema_version: u32,
    /// Digest of the input digests and the seed list.
    pub config_hash: String,
    pub scenario_hash: String,
    pub curriculum_hash: String,
    pub archetypes_hash: String,
    pub seeds: Vec<u64>,
    pub n_agents: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub replications: Vec<Replication>,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn config_hash(scenario: &str, curriculum: &str, archetypes: &str, seeds: &[u64]) -> String {
    let mut h = Sha256::new();
    for (label, digest) in [
        ("scenario", scenario),
        ("curriculum", curriculum),
        ("archetypes", archetypes),
    ] {
        h.update(format!("{label}={digest}\n"));
    }
    let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();
    h.update(format!("seeds={}\n", seeds.join(",")));
    hex::encode(h.finalize())
}

pub fn entry(dir: &Path, rel: &str) -> Result<FileEntry, CliError> {
    let path = dir.join(rel);
    let bytes = std::fs::read(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(FileEntry {
        path: rel.to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        error::write(&dir.join(MANIFEST_FILE), text + "\n")
    }

    pub fn load(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text =
            std::fs::read_to_string(&path).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))
    }

    /// Every listed file must exist with its recorded size and digest, and
    /// the replication and input files must be listed.
    pub fn verify(&self, dir: &Path) -> Result<(), CliError> {
        for f in &self.files {
            let path = dir.join(&f.path);
            let bytes = std::fs::read(&path).map_err(|e| CliError::Manifest(format!("{}: {e}", path.display())))?;
            if bytes.len() as u64 != f.bytes || sha256_hex(&bytes) != f.sha256 {
                return Err(CliError::Manifest(format!("checksum mismatch for {}", f.path)));
            }
        }
        let listed = |p: &str| self.files.iter().any(|f| f.path == p);
        for p in self
            .replications
            .iter()
            .map(|r| r.path.as_str())
            .chain(crate::run::INPUT_FILES)
        {
            if !listed(p) {
                return Err(CliError::Manifest(format!("{p} is not in the inventory")));
            }
        }
        let digest = |p: &str| self.files.iter().find(|f| f.path == p).map(|f| f.sha256.as_str());
        let [s, c, a] = crate::run::INPUT_FILES.map(digest);
        if s != Some(self.scenario_hash.as_str())
            || c != Some(self.curriculum_hash.as_str())
            || a != Some(self.archetypes_hash.as_str())
        {
            return Err(CliError::Manifest("input digests disagree with the inventory".into()));
        }
        if config_hash(
            &self.scenario_hash,
            &self.curriculum_hash,
            &self.archetypes_hash,
            &self.seeds,
        ) != self.config_hash
        {
            return Err(CliError::Manifest("config hash mismatch".into()));
        }
        Ok(())
    }
}
