//! Flat key-value run configuration; command-line flags override file keys.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CliError, Result};

/// Parsed `key = value` configuration file. Lines starting with `#` and
/// blank lines are ignored; later keys override earlier ones.
#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::parse(
                    path,
                    lineno + 1,
                    format!("expected key = value, got {line:?}"),
                )
            })?;
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(Config { values })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    /// Typed lookup; flag value wins over the config key, then the default.
    pub fn resolve<T: FromStr + Clone>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map_err(|_| CliError::usage(format!("config key {key}: cannot parse {raw:?}"))),
            None => Ok(default),
        }
    }

    /// Like `resolve` but without a default; `None` when absent everywhere.
    pub fn resolve_opt<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if let Some(v) = flag {
            return Ok(Some(v));
        }
        match self.get(key) {
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| CliError::usage(format!("config key {key}: cannot parse {raw:?}"))),
            None => Ok(None),
        }
    }

    /// Boolean flags: the flag being present wins; otherwise the config key
    /// (`true|false|1|0|yes|no`).
    pub fn resolve_bool(&self, flag: bool, key: &str) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        match self.get(key) {
            Some(raw) => match raw {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                other => Err(CliError::usage(format!(
                    "config key {key}: expected a boolean, got {other:?}"
                ))),
            },
            None => Ok(false),
        }
    }
}
