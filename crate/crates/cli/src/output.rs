//! Output files are staged in memory and only reach their final paths once
//! every computation has succeeded. Each file lands by rename, so a reader
//! never sees a half-written one.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

fn parent_of(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

/// Writes `bytes` to a temporary file next to `path`, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = parent_of(path);
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::Builder::new()
        .prefix(".synacc-")
        .tempfile_in(dir)
        .with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)
        .and_then(|_| tmp.as_file().sync_all())
        .with_context(|| format!("writing {}", path.display()))?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

/// A set of files destined for one output directory.
#[derive(Debug, Default)]
pub struct OutputSet {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl OutputSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, rel: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((rel.into(), bytes.into()));
    }

    pub fn files(&self) -> impl Iterator<Item = (&Path, &[u8])> {
        self.files.iter().map(|(p, b)| (p.as_path(), b.as_slice()))
    }

    /// A fresh directory is assembled under a temporary name and renamed into
    /// place in one step. Into an existing directory, files are replaced one
    /// at a time.
    pub fn commit(self, dir: &Path) -> Result<()> {
        if dir.exists() {
            for (rel, bytes) in &self.files {
                write_atomic(&dir.join(rel), bytes)?;
            }
            return Ok(());
        }
        let parent = parent_of(dir);
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        let staging = tempfile::Builder::new()
            .prefix(".synacc-")
            .tempdir_in(parent)
            .with_context(|| format!("creating a staging directory in {}", parent.display()))?;
        for (rel, bytes) in &self.files {
            let path = staging.path().join(rel);
            fs::create_dir_all(parent_of(&path))?;
            fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        }
        fs::rename(staging.path(), dir).with_context(|| format!("renaming staged outputs into {}", dir.display()))?;
        // the staging path no longer exists; dropping the guard is a no-op
        drop(staging);
        Ok(())
    }
}
