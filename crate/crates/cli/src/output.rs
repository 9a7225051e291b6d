//! Output directory handling: every command writes into one directory and
//! refuses to replace existing files unless forced.

use std::path::{Path, PathBuf};

use crate::error::{CliError, Result};

#[derive(Clone, Debug)]
pub struct OutputDir {
    root: PathBuf,
    force: bool,
}

impl OutputDir {
    pub fn new(root: impl Into<PathBuf>, force: bool) -> Self {
        OutputDir {
            root: root.into(),
            force,
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, relative: impl AsRef<Path>) -> PathBuf {
        self.root.join(relative)
    }

    /// Fails before anything is written if one of the targets exists and
    /// overwriting was not requested.
    pub fn claim<P: AsRef<Path>>(&self, relative: &[P]) -> Result<()> {
        if self.force {
            return Ok(());
        }
        for r in relative {
            let p = self.path(r);
            if p.exists() {
                return Err(CliError::Exists(p));
            }
        }
        Ok(())
    }

    /// Writes a file, creating parent directories.
    pub fn write(&self, relative: impl AsRef<Path>, contents: &str) -> Result<PathBuf> {
        let path = self.path(relative);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
