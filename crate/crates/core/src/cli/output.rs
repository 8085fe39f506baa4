//! Output directory with atomic writes and a hashed run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::{hex_digest, SCHEMA_VERSION};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize)]
pub struct OutputEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub command: String,
    pub version: String,
    pub config_hash: String,
    pub outputs: Vec<OutputEntry>,
    pub seed: u64,
    pub duration_s: f64,
    pub warnings: Vec<String>,
}

/// Writes `bytes` to `path` through a sibling temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::invalid("output path has no file name"))?;
    let tmp = dir.join(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub struct OutputDir {
    dir: PathBuf,
    entries: Vec<OutputEntry>,
    pub warnings: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), entries: vec![], warnings: vec![] })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.entries.retain(|e| e.path != name);
        self.entries.push(OutputEntry { path: name.into(), sha256: hex_digest(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        body(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut buf = serde_json::to_vec_pretty(value).map_err(|e| Error::invalid(e.to_string()))?;
        buf.push(b'\n');
        self.write(name, &buf)
    }

    /// Writes `manifest.json` listing every output written so far.
    pub fn finish(mut self, command: &str, config_hash: &str, seed: u64, duration_s: f64) -> Result<Manifest> {
        let mut seen = std::collections::HashSet::new();
        self.warnings.retain(|w| seen.insert(w.clone()));
        let manifest = Manifest {
            schema_version: SCHEMA_VERSION,
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_hash: config_hash.into(),
            outputs: self.entries,
            seed,
            duration_s,
            warnings: self.warnings,
        };
        let mut buf = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::invalid(e.to_string()))?;
        buf.push(b'\n');
        write_atomic(&self.dir.join("manifest.json"), &buf)?;
        Ok(manifest)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
    pub exit_code: i32,
}

/// Validation problems exit with 2, failures during computation with 1.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidInput(_)
        | Error::Config(_)
        | Error::GridMismatch(_)
        | Error::TooManyModes { .. }
        | Error::GridTooCoarse(_)
        | Error::PerturbationTooLarge { .. }
        | Error::MissingProbes(_) => 2,
        _ => 1,
    }
}

pub fn error_report(err: &Error) -> ErrorReport {
    let kind = format!("{err:?}");
    let kind = kind.split(['(', ' ', '{']).next().unwrap_or("Error").to_string();
    ErrorReport { kind, message: err.to_string(), exit_code: exit_code(err) }
}
