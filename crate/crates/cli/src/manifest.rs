//! Run manifests: what ran, on which inputs, producing which outputs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;
const DIR_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRef {
    pub path: String,
    pub sha256: String,
}

impl FileRef {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(FileRef {
            path: path.display().to_string(),
            sha256: hash_path(path)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub toolkit: String,
    pub command: String,
    /// Effective arguments after merging the config file.
    pub argv: Vec<String>,
    pub config_file: Option<FileRef>,
    /// Hash of the effective arguments.
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<FileRef>,
    pub outputs: Vec<FileRef>,
    /// Manifests of the stages that produced the inputs.
    pub parents: Vec<FileRef>,
    pub summary: serde_json::Value,
    pub started_at: String,
    pub finished_at: String,
}

impl RunManifest {
    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading manifest {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)?;
        fs::write(path, json + "\n").with_context(|| format!("writing manifest {}", path.display()))
    }
}

/// Where the manifest of an artifact lives: inside a directory artifact,
/// beside a file artifact.
pub fn manifest_path(artifact: &Path) -> PathBuf {
    if artifact.is_dir() {
        artifact.join(DIR_MANIFEST)
    } else {
        let mut name = artifact.as_os_str().to_os_string();
        name.push(".manifest.json");
        PathBuf::from(name)
    }
}

pub fn config_hash(argv: &[String]) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(argv).expect("argv serializes")))
}

/// File content hash; a directory hashes its sorted relative paths and file
/// hashes, skipping its own manifest.
pub fn hash_path(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut entries = Vec::new();
        collect_files(path, path, &mut entries)?;
        entries.sort();
        let mut h = Sha256::new();
        for (rel, digest) in entries {
            h.update(rel.as_bytes());
            h.update(b"\0");
            h.update(digest.as_bytes());
            h.update(b"\n");
        }
        Ok(hex::encode(h.finalize()))
    } else {
        let bytes = fs::read(path).with_context(|| format!("hashing {}", path.display()))?;
        Ok(hex::encode(Sha256::digest(bytes)))
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<(String, String)>) -> Result<()> {
    for entry in fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let p = entry?.path();
        if p.is_dir() {
            collect_files(root, &p, out)?;
        } else if !(dir == root && p.file_name().is_some_and(|n| n == DIR_MANIFEST)) {
            let rel = p
                .strip_prefix(root)
                .expect("under root")
                .to_string_lossy()
                .replace('\\', "/");
            out.push((rel, hash_path(&p)?));
        }
    }
    Ok(())
}

/// Manifests of the inputs that have one.
pub fn parents_of(inputs: &[PathBuf]) -> Result<Vec<FileRef>> {
    let mut out = Vec::new();
    for i in inputs {
        let m = manifest_path(i);
        if m.is_file() && !out.iter().any(|r: &FileRef| r.path == m.display().to_string()) {
            out.push(FileRef::of(&m)?);
        }
    }
    Ok(out)
}
