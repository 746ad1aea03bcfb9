//! JSONL and small-file helpers shared by the subcommands.

use crate::commands::CmdError;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Read a JSONL file; malformed lines are collected, not fatal.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Vec<T>, usize), CmdError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CmdError::Usage(format!("cannot open {}: {e}", path.display())))?;
    let mut items = Vec::new();
    let mut malformed = 0usize;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| CmdError::Failed(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(&line) {
            Ok(item) => items.push(item),
            Err(e) => {
                log::warn!("skipping malformed line: {e}");
                malformed += 1;
            }
        }
    }
    Ok((items, malformed))
}

pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), CmdError> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| CmdError::Failed(format!("cannot create {}: {e}", path.display())))?;
    for item in items {
        let line = serde_json::to_string(item).map_err(|e| CmdError::Failed(e.to_string()))?;
        writeln!(file, "{line}").map_err(|e| CmdError::Failed(e.to_string()))?;
    }
    Ok(())
}

/// `@path` reads the file; anything else is taken verbatim.
pub fn inline_or_file(value: &str) -> Result<String, CmdError> {
    match value.strip_prefix('@') {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| CmdError::Usage(format!("cannot read {path}: {e}"))),
        None => Ok(value.to_string()),
    }
}
