//! Deterministic run-directory writer. Every file carries the tool version
//! and the config hash: CSVs in a leading `#` comment line, JSON summaries in
//! top-level fields. No timestamps, no absolute paths in the payload.

use crate::error::{io_err, CliError};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub struct RunWriter {
    dir: PathBuf,
    config_hash: String,
}

impl RunWriter {
    pub fn create(dir: &Path, config_hash: &str) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| io_err(&format!("cannot create output directory {}", dir.display()), e))?;
        Ok(RunWriter { dir: dir.to_path_buf(), config_hash: config_hash.to_string() })
    }

    pub fn config_hash(&self) -> &str {
        &self.config_hash
    }

    fn meta_line(&self) -> String {
        format!("# tool_version={} config_hash={}", TOOL_VERSION, self.config_hash)
    }

    /// CSV with the metadata comment line, then the header row, then `rows`.
    pub fn write_csv(&self, name: &str, header: &str, rows: &[String]) -> Result<(), CliError> {
        let mut body = String::new();
        body.push_str(&self.meta_line());
        body.push('\n');
        body.push_str(header);
        body.push('\n');
        for row in rows {
            body.push_str(row);
            body.push('\n');
        }
        self.write_file(name, &body)
    }

    /// Prepends the metadata comment line to an already-formatted CSV body
    /// (header included).
    pub fn write_csv_body(&self, name: &str, body: &str) -> Result<(), CliError> {
        let mut s = String::new();
        s.push_str(&self.meta_line());
        s.push('\n');
        s.push_str(body);
        self.write_file(name, &s)
    }

    /// summary.json with the standard envelope around the payload.
    pub fn write_summary(&self, command: &str, payload: Value) -> Result<(), CliError> {
        let doc = json!({
            "command": command,
            "tool_version": TOOL_VERSION,
            "config_hash": self.config_hash,
            "results": payload,
        });
        self.write_json("summary.json", &doc)
    }

    pub fn write_json(&self, name: &str, value: &Value) -> Result<(), CliError> {
        let mut s = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Io(format!("cannot serialize {name}: {e}")))?;
        s.push('\n');
        self.write_file(name, &s)
    }

    pub fn write_file(&self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| io_err(&format!("cannot write {}", path.display()), e))
    }
}
