//! Minimal `key = value` file parsing shared by the schema and grid-config
//! loaders. Lines starting with `#` and blank lines are ignored; keys keep
//! file order so loaders can reject duplicates with a useful message.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KvError {
    #[error("line {line}: expected `key = value`, got {text:?}")]
    Malformed { line: usize, text: String },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { line: usize, key: String },
}

/// Parses `key = value` lines into (key, value) pairs in file order.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>, KvError> {
    let mut pairs: Vec<(String, String)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let Some((key, value)) = trimmed.split_once('=') else {
            return Err(KvError::Malformed {
                line,
                text: trimmed.to_string(),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(KvError::Malformed {
                line,
                text: trimmed.to_string(),
            });
        }
        if pairs.iter().any(|(k, _)| *k == key) {
            return Err(KvError::Duplicate { line, key });
        }
        pairs.push((key, value));
    }
    Ok(pairs)
}

/// Splits a comma-separated list, trimming whitespace and dropping nothing:
/// empty items are reported as-is so callers can reject them.
pub fn split_list(value: &str) -> Vec<String> {
    if value.trim().is_empty() {
        return Vec::new();
    }
    value.split(',').map(|s| s.trim().to_string()).collect()
}
