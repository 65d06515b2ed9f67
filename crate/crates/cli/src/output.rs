//! Output files: atomic writes and the per-directory run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use fpcg_core::{Error, Result};
use serde::Serialize;
use serde_json::Value;

pub const RUN_MANIFEST: &str = "run.json";

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))
}

fn staging_path(path: &Path) -> PathBuf {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!(".{name}.partial-{}", std::process::id()))
}

/// Runs `write` against a staging file next to `path`, then renames it into
/// place so readers never see a partial file.
pub fn write_atomic(path: &Path, write: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    let tmp = staging_path(path);
    if let Err(e) = write(&tmp) {
        let _ = fs::remove_file(&tmp);
        return Err(e);
    }
    fs::rename(&tmp, path).map_err(|e| Error::file(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, |tmp| fs::write(tmp, bytes).map_err(|e| Error::file(tmp, e)))
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// `path` relative to `base` when both resolve, otherwise `path` as given.
/// Keeps manifests free of machine-specific prefixes.
pub fn relative_to(path: &Path, base: &Path) -> String {
    let resolved = (fs::canonicalize(path), fs::canonicalize(base));
    match resolved {
        (Ok(p), Ok(b)) => pathdiff::diff_paths(p, b).unwrap_or_else(|| path.to_path_buf()),
        _ => path.to_path_buf(),
    }
    .to_string_lossy()
    .replace('\\', "/")
}

/// Everything needed to repeat a command: its name, the inputs relative to
/// the output directory, the fully resolved configuration and the tool
/// version.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub inputs: Vec<(String, String)>,
    pub options: Value,
    pub config: Value,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &'static str) -> Self {
        RunManifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            inputs: Vec::new(),
            options: Value::Null,
            config: Value::Null,
            outputs: Vec::new(),
        }
    }

    pub fn input(mut self, role: &str, path: &Path, out_dir: &Path) -> Self {
        self.inputs.push((role.to_string(), relative_to(path, out_dir)));
        self
    }

    pub fn options(mut self, options: Value) -> Self {
        self.options = options;
        self
    }

    pub fn config(mut self, config: &impl Serialize) -> Result<Self> {
        self.config = serde_json::to_value(config)?;
        Ok(self)
    }

    pub fn write(mut self, out_dir: &Path, mut outputs: Vec<String>) -> Result<()> {
        outputs.sort();
        self.outputs = outputs;
        write_json(&out_dir.join(RUN_MANIFEST), &self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_leaves_no_staging_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_bytes(&p, b"x").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"x");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
        let failed = write_atomic(&dir.path().join("b.txt"), |_| Err(Error::input("boom")));
        assert!(failed.is_err());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("sim");
        let b = dir.path().join("det");
        fs::create_dir_all(&a).unwrap();
        fs::create_dir_all(&b).unwrap();
        assert_eq!(relative_to(&a.join("."), &b), "../sim");
    }
}
