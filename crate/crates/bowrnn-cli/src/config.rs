//! Plain `key = value` configuration files and flag/config/default
//! resolution. Command-line flags take precedence over config entries, which
//! take precedence over built-in defaults.

use anyhow::{anyhow, Result};
use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

/// Raised for bad flags or config entries; the process exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(UsageError(msg.into()))
}

/// Keys any command may read from a config file.
const KNOWN_KEYS: &[&str] = &[
    "seed",
    "channels",
    "codewords",
    "restarts",
    "max-iterations",
    "tolerance",
    "assignment",
    "feature-map",
    "map-samples",
    "map-period",
    "kernel",
    "strategy",
    "subsample",
    "subsample-mode",
    "optimizer",
    "rate",
    "batch",
    "epochs",
    "classes",
    "dim",
    "sequences",
    "frames",
    "rho",
    "test-fraction",
    "split-channels",
    "rare-per-class",
    "center-scale",
    "noise",
    "rare-spread",
];

#[derive(Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(usage(format!(
                    "config {}:{}: expected `key = value`, got {raw:?}",
                    path.display(),
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(usage(format!(
                    "config {}:{}: unknown key {key:?}",
                    path.display(),
                    lineno + 1
                )));
            }
            entries.insert(key, value.trim().to_string());
        }
        Ok(Self { entries })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Flag value if given, else the parsed config entry.
    pub fn get<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.raw(key) {
            Some(text) => text
                .parse::<T>()
                .map(Some)
                .map_err(|_| usage(format!("config key {key}: cannot parse {text:?}"))),
            None => Ok(None),
        }
    }

    /// As [`Self::get`] with a default.
    pub fn get_or<T: FromStr>(&self, flag: Option<T>, key: &str, default: T) -> Result<T> {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    /// Required value: flag or config entry must provide it.
    pub fn require<T: FromStr>(&self, flag: Option<T>, key: &str) -> Result<T> {
        self.get(flag, key)?
            .ok_or_else(|| usage(format!("missing required option --{key}")))
    }
}
