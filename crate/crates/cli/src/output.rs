//! Single writer for everything a run produces. Data files carry no
//! timestamps; what was run and with which settings goes to a sidecar
//! `<command>.meta.json` in the same directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Serialize)]
struct Entry {
    file: String,
    /// CSV header, "json" or "field map".
    format: String,
}

pub struct Output {
    dir: PathBuf,
    entries: Vec<Entry>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Writes `header` and `rows` (already formatted, in final order).
    pub fn csv<I>(&mut self, name: &str, header: &str, rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = String>,
    {
        let mut text = String::with_capacity(4096);
        text.push_str(header);
        text.push('\n');
        for row in rows {
            text.push_str(&row);
            text.push('\n');
        }
        self.write(name, text.as_bytes(), header)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Numerical(format!("cannot encode report: {e}")))?;
        text.push('\n');
        self.write(name, text.as_bytes(), "json")
    }

    /// Records a file written by someone else (field maps).
    pub fn register(&mut self, name: &str, format: &str) {
        self.entries.push(Entry {
            file: name.into(),
            format: format.into(),
        });
    }

    fn write(&mut self, name: &str, bytes: &[u8], format: &str) -> Result<(), CliError> {
        let path = self.path(name);
        let mut f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
        f.write_all(bytes).map_err(|e| io_err(&path, e))?;
        self.register(name, format);
        Ok(())
    }

    pub fn finish(self, command: &str, config: &RunConfig) -> Result<(), CliError> {
        let meta = json!({
            "tool": "ringqed",
            "version": env!("CARGO_PKG_VERSION"),
            "command": command,
            "threads": rayon::current_num_threads(),
            "config": config,
            "files": self.entries,
        });
        let path = self.dir.join(format!("{command}.meta.json"));
        let text = serde_json::to_string_pretty(&meta).expect("metadata is serializable") + "\n";
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    }
}

/// Shortest round-trip form, so identical numbers always print identically.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
