//! Run directories: `<UTC timestamp>-<config hash>`, assembled under a hidden
//! staging name and renamed into place only when every artifact is written.

use std::fs;
use std::path::{Path, PathBuf};

use donorspin::error::{Error, Result};
use donorspin::io::{write_json, Table};
use serde::Serialize;

pub struct RunDir {
    staging: PathBuf,
    target: PathBuf,
    committed: bool,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::io(path.display().to_string(), e)
}

impl RunDir {
    pub fn create(root: &Path, hash: &str) -> Result<Self> {
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%.3fZ");
        let name = format!("{stamp}-{hash}");
        fs::create_dir_all(root).map_err(io_err(root))?;
        let staging = root.join(format!(".{name}.partial"));
        fs::create_dir(&staging).map_err(io_err(&staging))?;
        Ok(Self { staging, target: root.join(name), committed: false })
    }

    /// Where artifacts are written until `commit`.
    pub fn path(&self) -> &Path {
        &self.staging
    }

    pub fn subdir(&self, name: &str) -> Result<PathBuf> {
        let p = self.staging.join(name);
        fs::create_dir_all(&p).map_err(io_err(&p))?;
        Ok(p)
    }

    /// Moves the finished directory into place; a same-name directory from a
    /// run in the same millisecond gets a numeric suffix.
    pub fn commit(mut self) -> Result<PathBuf> {
        let mut target = self.target.clone();
        let mut n = 2;
        while target.exists() {
            target = self.target.with_file_name(format!("{}-{n}", self.target.file_name().unwrap_or_default().to_string_lossy()));
            n += 1;
        }
        fs::rename(&self.staging, &target).map_err(io_err(&target))?;
        self.committed = true;
        Ok(target)
    }
}

impl Drop for RunDir {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.staging);
        }
    }
}

pub fn write_table(dir: &Path, name: &str, table: &Table) -> Result<()> {
    table.write(&dir.join(format!("{name}.csv")))
}

pub fn write_document<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> Result<()> {
    write_json(&dir.join(name), value)
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<()> {
    let p = dir.join(name);
    fs::write(&p, text).map_err(io_err(&p))
}
