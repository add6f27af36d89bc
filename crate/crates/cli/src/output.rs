//! Output directory handling and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::CliError;

/// Collects written files and finishes with a manifest.
pub struct RunOutput {
    dir: PathBuf,
    files: Vec<String>,
    started: Instant,
}

#[derive(Debug, Serialize)]
pub struct RunManifest<'a> {
    pub command: &'a str,
    pub version: &'a str,
    pub seed: u64,
    pub config: serde_json::Value,
    pub outputs: &'a [String],
    pub duration_s: f64,
}

pub const MANIFEST: &str = "manifest.json";

impl RunOutput {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        // a stale manifest would vouch for this run if it fails
        let stale = dir.join(MANIFEST);
        if stale.exists() {
            fs::remove_file(&stale).map_err(|e| CliError::io(&stale, e))?;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).expect("serializable output");
        self.write(name, &(text + "\n"))
    }

    /// Writes `manifest.json` through a temporary file and a rename.
    pub fn finish<C: Serialize>(self, command: &str, seed: u64, config: &C) -> Result<PathBuf, CliError> {
        let manifest = RunManifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config: serde_json::to_value(config).expect("serializable config"),
            outputs: &self.files,
            duration_s: self.started.elapsed().as_secs_f64(),
        };
        let tmp = self.dir.join(".manifest.json.tmp");
        let text = serde_json::to_string_pretty(&manifest).expect("serializable manifest") + "\n";
        fs::write(&tmp, text).map_err(|e| CliError::io(&tmp, e))?;
        let path = self.dir.join(MANIFEST);
        fs::rename(&tmp, &path).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}
