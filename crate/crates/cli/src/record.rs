//! Atomic output files, content hashes and the per-run record.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

/// Run records live under `<run dir>/records/<command>.json`.
pub fn record_path(run_dir: &Path, command: &str) -> PathBuf {
    run_dir.join("records").join(format!("{command}.json"))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes through a temporary sibling and renames, so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let name = path.file_name().context("output path has no file name")?;
    let tmp = path.with_file_name(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = std::fs::File::create(&tmp).with_context(|| format!("creating {}", tmp.display()))?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// Tracks files touched by a command so they can be hashed on success.
/// Files the command wrote itself are removed again on failure; reused
/// artifacts from earlier commands are left alone.
#[derive(Debug, Default)]
pub struct Outputs {
    base: PathBuf,
    files: Vec<(PathBuf, bool)>,
}

impl Outputs {
    pub fn new(base: impl Into<PathBuf>) -> Self {
        Self {
            base: base.into(),
            files: Vec::new(),
        }
    }

    pub fn base(&self) -> &Path {
        &self.base
    }

    pub fn write(&mut self, rel: impl AsRef<Path>, bytes: &[u8]) -> Result<PathBuf> {
        let p = self.base.join(rel);
        write_atomic(&p, bytes)?;
        self.files.push((p.clone(), true));
        Ok(p)
    }

    /// Registers a file this command wrote by other means.
    pub fn track(&mut self, p: PathBuf) {
        self.files.push((p, true));
    }

    /// Registers an existing artifact that is hashed but never removed.
    pub fn reuse(&mut self, p: PathBuf) {
        self.files.push((p, false));
    }

    /// Relative path → SHA-256 of every tracked file.
    pub fn hashes(&self) -> Result<BTreeMap<String, String>> {
        let mut out = BTreeMap::new();
        for (p, _) in &self.files {
            let rel = p.strip_prefix(&self.base).unwrap_or(p);
            let key = rel.to_string_lossy().replace('\\', "/");
            out.insert(key, sha256_hex(&std::fs::read(p)?));
        }
        Ok(out)
    }

    /// Deletes every file this command wrote; used when a stage fails.
    pub fn remove_written(&self) {
        for (p, owned) in &self.files {
            if *owned {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub command: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    /// Relative output path → SHA-256.
    pub artifacts: BTreeMap<String, String>,
    /// Wall-clock seconds per stage; not covered by any hash.
    pub timings_s: BTreeMap<String, f64>,
}

impl RunRecord {
    /// Hash over everything except timings.
    pub fn artifacts_hash(&self) -> String {
        let json = serde_json::to_vec(&self.artifacts).expect("serializable");
        sha256_hex(&json)
    }
}
