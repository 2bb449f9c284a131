//! File formats, configuration and command implementations for the
//! `tfsynth` command-line tool.

pub mod commands;
pub mod config;
pub mod csvio;
pub mod document;
pub mod error;
pub mod export;
pub mod matrix;

use std::path::Path;

use error::{CliError, Result};

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Pretty JSON with a trailing newline.
pub(crate) fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    write_text(path, &s)
}
