//! Output directories that appear atomically.
//!
//! A command writes into `<out>.partial` and renames it to `<out>` once
//! every file and the manifest are in place, so a directory named `<out>`
//! is always complete.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Describes a finished bundle well enough to rerun the command that made
/// it: the resolved configuration, the seed and the checksums of inputs and
/// outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub inputs: Vec<FileEntry>,
    pub files: Vec<FileEntry>,
    /// Command-specific facts about the outputs.
    #[serde(default)]
    pub details: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, seed: u64, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config: serde_json::to_value(config).map_err(|e| Error::Input(format!("encoding config: {e}")))?,
            inputs: Vec::new(),
            files: Vec::new(),
            details: serde_json::Value::Null,
        })
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Checksum entry for an input file, named as given on the command line.
pub fn input_entry(path: &Path) -> Result<FileEntry> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(FileEntry { name: path.display().to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(&bytes) })
}

pub fn staging_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".partial");
    out.with_file_name(name)
}

/// Refuses to replace anything but an earlier bundle.
pub fn check_destination(out: &Path) -> Result<()> {
    if out.as_os_str().is_empty() || out.file_name().is_none() {
        return Err(Error::Usage(format!("invalid output directory {:?}", out.display().to_string())));
    }
    if out.exists() && !out.join(MANIFEST).is_file() {
        return Err(Error::Usage(format!("{} exists and is not an output bundle", out.display())));
    }
    Ok(())
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_os_string();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// A bundle under construction.
#[derive(Debug)]
pub struct Bundle {
    out: PathBuf,
    staging: PathBuf,
    files: BTreeMap<String, FileEntry>,
}

impl Bundle {
    /// Starts a fresh staging directory, discarding any stale one.
    pub fn create(out: &Path) -> Result<Self> {
        check_destination(out)?;
        let staging = staging_path(out);
        if staging.exists() {
            fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        }
        fs::create_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
        Ok(Self { out: out.to_path_buf(), staging, files: BTreeMap::new() })
    }

    /// Continues an interrupted run in its existing staging directory.
    /// Files already present are not listed until written again.
    pub fn reopen(out: &Path) -> Result<Self> {
        check_destination(out)?;
        let staging = staging_path(out);
        if !staging.is_dir() {
            return Err(Error::Usage(format!("nothing to resume: {} does not exist", staging.display())));
        }
        Ok(Self { out: out.to_path_buf(), staging, files: BTreeMap::new() })
    }

    pub fn staging(&self) -> &Path {
        &self.staging
    }

    /// Writes a file that will be listed in the manifest.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.staging.join(name), bytes)?;
        let entry = FileEntry { name: name.into(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) };
        self.files.insert(name.into(), entry);
        Ok(())
    }

    /// Writes a working file (such as a checkpoint) that is not part of the
    /// finished bundle.
    pub fn write_scratch(&self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.staging.join(name), bytes)
    }

    pub fn read_scratch(&self, name: &str) -> Result<Option<Vec<u8>>> {
        let path = self.staging.join(name);
        match fs::read(&path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(Error::io(&path, e)),
        }
    }

    pub fn remove_scratch(&self, name: &str) -> Result<()> {
        let path = self.staging.join(name);
        match fs::remove_file(&path) {
            Err(e) if e.kind() != std::io::ErrorKind::NotFound => Err(Error::io(&path, e)),
            _ => Ok(()),
        }
    }

    /// Writes the manifest, drops unlisted files and moves the bundle into
    /// place.
    pub fn finish(self, mut manifest: Manifest) -> Result<PathBuf> {
        manifest.files = self.files.values().cloned().collect();
        let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Input(format!("encoding manifest: {e}")))?;
        text.push('\n');
        write_atomic(&self.staging.join(MANIFEST), text.as_bytes())?;
        let listing = fs::read_dir(&self.staging).map_err(|e| Error::io(&self.staging, e))?;
        for entry in listing {
            let entry = entry.map_err(|e| Error::io(&self.staging, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name != MANIFEST && !self.files.contains_key(&name) {
                let path = entry.path();
                fs::remove_file(&path).map_err(|e| Error::io(&path, e))?;
            }
        }
        check_destination(&self.out)?;
        if self.out.exists() {
            fs::remove_dir_all(&self.out).map_err(|e| Error::io(&self.out, e))?;
        }
        fs::rename(&self.staging, &self.out).map_err(|e| Error::io(&self.out, e))?;
        Ok(self.out)
    }
}
