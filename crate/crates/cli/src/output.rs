use std::io::Write;
use std::path::Path;

use clap::ValueEnum;
use lge_synthlab::write_atomic;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

/// Writes `text` atomically to `out`, or to stdout when no path is given.
pub fn emit(text: &str, out: Option<&Path>) -> CliResult {
    match out {
        Some(path) => write_atomic(path, text.as_bytes())
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Internal(format!("stdout: {e}")))
        }
    }
}

pub fn to_json<T: serde::Serialize>(value: &T) -> CliResult<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| CliError::Internal(format!("serialization failed: {e}")))
}
