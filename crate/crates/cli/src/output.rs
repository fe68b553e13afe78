use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

/// Where reports go, plus the effective configuration echoed into each.
pub struct Output {
    dir: PathBuf,
    config: Value,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path, config: Value) -> Result<Self> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            config,
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Writes `bytes` to `name` through a temporary file in the same
    /// directory, so readers never see a partial file.
    pub fn write_raw(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .with_context(|| format!("creating temporary file in {}", self.dir.display()))?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        log::info!("wrote {}", path.display());
        self.written.push(path.clone());
        Ok(path)
    }

    /// JSON report of the form `{"config": ..., "report": ...}`.
    pub fn json_report<T: Serialize>(&mut self, name: &str, report: &T) -> Result<PathBuf> {
        let body = json!({ "config": self.config, "report": report });
        let text = serde_json::to_string_pretty(&body)?;
        self.write_raw(name, text.as_bytes())
    }

    /// CSV data plus a `<stem>.meta.json` sidecar with the configuration and
    /// any extra fields.
    pub fn csv_report(&mut self, name: &str, csv: &[u8], extra: Value) -> Result<PathBuf> {
        let stem = name.strip_suffix(".csv").unwrap_or(name);
        let meta = json!({ "config": self.config, "data": name, "summary": extra });
        self.write_raw(
            &format!("{stem}.meta.json"),
            serde_json::to_string_pretty(&meta)?.as_bytes(),
        )?;
        self.write_raw(name, csv)
    }
}
