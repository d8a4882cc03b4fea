use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const LOCK_FILE: &str = ".lock";
const STAGING_DIR: &str = ".partial";
pub const QUARANTINE_DIR: &str = "quarantine";

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: impl AsRef<Path>) -> Result<String> {
    let mut f = fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

/// Writes through a sibling temp file and a rename.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Exclusive ownership of an output directory; released on drop.
#[derive(Debug)]
pub struct RunLock {
    path: PathBuf,
}

impl RunLock {
    pub fn acquire(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                writeln!(f, "{}", std::process::id())?;
                Ok(Self { path })
            }
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Locked(dir.to_path_buf())),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for RunLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Outputs are written to a staging directory and moved into place on
/// commit, or moved to `quarantine/` if the run fails.
#[derive(Debug)]
pub struct Staging {
    out: PathBuf,
    dir: PathBuf,
    files: Vec<String>,
}

impl Staging {
    /// Caller must hold the directory's `RunLock`.
    pub fn new(out: impl AsRef<Path>) -> Result<Self> {
        let out = out.as_ref().to_path_buf();
        let dir = out.join(STAGING_DIR);
        if dir.exists() {
            log::warn!("found stale staging directory in {}", out.display());
            move_to_quarantine(&out, &dir, "stale")?;
        }
        fs::create_dir_all(&dir)?;
        Ok(Self {
            out,
            dir,
            files: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Registers a file that was written directly under `path(name)`.
    pub fn track(&mut self, name: &str) {
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<String> {
        fs::write(self.path(name), bytes)?;
        self.track(name);
        Ok(sha256_bytes(bytes))
    }

    pub fn commit(self) -> Result<PathBuf> {
        for name in &self.files {
            fs::rename(self.dir.join(name), self.out.join(name))?;
        }
        fs::remove_dir_all(&self.dir)?;
        Ok(self.out.clone())
    }

    pub fn quarantine(self, label: &str) -> Result<PathBuf> {
        move_to_quarantine(&self.out, &self.dir, label)
    }
}

fn move_to_quarantine(out: &Path, dir: &Path, label: &str) -> Result<PathBuf> {
    let q = out.join(QUARANTINE_DIR);
    fs::create_dir_all(&q)?;
    let target = (1..)
        .map(|k| q.join(format!("{label}-{k:03}")))
        .find(|p| !p.exists())
        .expect("unbounded range");
    fs::rename(dir, &target)?;
    Ok(target)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Provenance record for a run: no timestamps, so equal runs produce equal
/// manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub name: String,
    pub approach: String,
    pub seed: u64,
    pub config_sha256: String,
    pub inputs: BTreeMap<String, InputDigest>,
    pub outputs: BTreeMap<String, String>,
}
