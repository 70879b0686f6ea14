//! Plain-text `key = value` sidecar files carrying run metadata.

use crate::error::{Error, Result};
use std::fs;
use std::path::Path;

pub fn write_keyvalues(path: &Path, pairs: &[(String, String)]) -> Result<()> {
    let mut text = String::new();
    for (k, v) in pairs {
        text.push_str(k);
        text.push_str(" = ");
        text.push_str(v);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads `key = value` lines in order, skipping blanks and `#` comments.
pub fn read_keyvalues(path: &Path) -> Result<Vec<(String, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(Error::load(
                path,
                format!("line {}: expected 'key = value'", lineno + 1),
            ));
        };
        pairs.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(pairs)
}

pub fn lookup<'a>(pairs: &'a [(String, String)], key: &str) -> Option<&'a str> {
    pairs
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
}
