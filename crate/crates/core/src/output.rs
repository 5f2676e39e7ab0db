//! Output directory with atomic writes, and the run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::traps::StageReport;

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Relative to the output directory, `/`-separated.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// All writes go through here: names must be relative and stay inside the
/// directory, and every file is written to a temporary then renamed.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    written: Vec<FileEntry>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self { root, written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.written
    }

    /// Resolves `name` below the root, rejecting absolute paths and `..`.
    pub fn resolve(&self, name: &str) -> Result<PathBuf> {
        let rel = Path::new(name);
        let normal = rel.components().all(|c| matches!(c, Component::Normal(_)));
        if name.is_empty() || !normal {
            return Err(Error::OutsideOutputDir(rel.to_path_buf()));
        }
        Ok(self.root.join(rel))
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.resolve(name)?;
        let parent = path.parent().expect("resolved path has a parent");
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent).map_err(|e| Error::io(parent, e))?;
        tmp.write_all(bytes).map_err(|e| Error::io(tmp.path(), e))?;
        tmp.as_file().sync_all().map_err(|e| Error::io(tmp.path(), e))?;
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        let entry = FileEntry { path: name.replace('\\', "/"), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) };
        self.written.retain(|f| f.path != entry.path);
        self.written.push(entry);
        Ok(path)
    }

    pub fn write_str(&mut self, name: &str, text: &str) -> Result<PathBuf> {
        self.write(name, text.as_bytes())
    }
}

/// Provenance of one command: what ran, with which inputs, producing which files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub toolkit_version: String,
    /// SHA-256 of the fully materialized configuration.
    pub config_hash: String,
    pub seed: u64,
    pub ledger: Vec<StageReport>,
    /// Scalar results.
    pub summary: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Result<Self> {
        Ok(Self {
            command: command.to_string(),
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: config_hash(config)?,
            seed: config.master_seed,
            ledger: Vec::new(),
            summary: BTreeMap::new(),
            warnings: Vec::new(),
            files: Vec::new(),
        })
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.summary.insert(key.to_string(), value);
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the JSON form; equal for equal config, seed and results.
    pub fn hash(&self) -> Result<String> {
        Ok(sha256_hex(self.to_json()?.as_bytes()))
    }

    /// Records the files written so far and writes `name` into `out`.
    pub fn finish(mut self, out: &mut OutputDir, name: &str) -> Result<Self> {
        self.files = out.files().to_vec();
        out.write_str(name, &self.to_json()?)?;
        Ok(self)
    }
}

/// Hash of the materialized configuration; the output directory is left out
/// so that a run hashes the same wherever it is written.
pub fn config_hash(config: &RunConfig) -> Result<String> {
    Ok(sha256_hex(config.to_portable_toml()?.as_bytes()))
}
