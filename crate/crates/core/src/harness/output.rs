//! Output directories are built next to their destination and renamed into place,
//! so a failed run leaves nothing behind.

use std::fs;
use std::path::{Path, PathBuf};

use crate::{Error, Result};

/// Files that mark a directory as an earlier harness output, safe to replace.
const MARKERS: [&str; 2] = ["manifest.toml", "rate_fit.json"];

pub(crate) struct Staging {
    target: PathBuf,
    dir: PathBuf,
    committed: bool,
}

impl Staging {
    pub(crate) fn new(target: &Path) -> Result<Self> {
        if target.exists() {
            let replaceable = target.is_dir()
                && (MARKERS.iter().any(|m| target.join(m).is_file())
                    || fs::read_dir(target).map_err(|e| Error::io(target, e))?.next().is_none());
            if !replaceable {
                return Err(Error::Io {
                    path: target.display().to_string(),
                    message: "exists and is not an earlier output directory; refusing to replace it".into(),
                });
            }
        }
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
        let name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let nanos = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_nanos())
            .unwrap_or(0);
        let dir = parent.join(format!(".{name}.staging-{}-{nanos}", std::process::id()));
        fs::create_dir(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Staging {
            target: target.to_path_buf(),
            dir,
            committed: false,
        })
    }

    pub(crate) fn path(&self) -> &Path {
        &self.dir
    }

    pub(crate) fn subdir(&self, name: &str) -> Result<PathBuf> {
        let p = self.dir.join(name);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
        Ok(p)
    }

    /// Moves the finished directory to the target path and returns it.
    pub(crate) fn commit(mut self) -> Result<PathBuf> {
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(|e| Error::io(&self.target, e))?;
        }
        fs::rename(&self.dir, &self.target).map_err(|e| Error::io(&self.target, e))?;
        self.committed = true;
        Ok(self.target.clone())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}
