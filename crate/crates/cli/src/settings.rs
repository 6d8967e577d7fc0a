//! Resolved command settings.
//!
//! Every tunable of a command is a `key=value` pair with a default. A config
//! file may override defaults and command-line flags override both. The
//! resolved table, together with the command name, is what gets hashed into
//! the `config_hash` line of emitted CSV files. Paths are not part of it.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{usage, CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    command: String,
    values: BTreeMap<String, String>,
}

/// Parses `key = value` lines; `#` starts a comment, blank lines are skipped.
pub fn parse_config(text: &str) -> CliResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return usage(format!("config line {}: expected key=value, got {raw:?}", i + 1));
        };
        out.push((normalize_key(k), v.trim().to_string()));
    }
    Ok(out)
}

fn normalize_key(k: &str) -> String {
    k.trim().replace('-', "_")
}

impl Settings {
    /// Layers defaults, then the config file, then flag overrides. Keys
    /// unknown to the command are rejected.
    pub fn resolve(
        command: &str,
        defaults: &[(&str, &str)],
        config: Option<&Path>,
        overrides: &[(&str, Option<String>)],
    ) -> CliResult<Self> {
        let mut values: BTreeMap<String, String> =
            defaults.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let mut set = |k: String, v: String| -> CliResult<()> {
            match values.get_mut(&k) {
                Some(slot) => {
                    *slot = v;
                    Ok(())
                }
                None => usage(format!("unknown setting {k:?} for {command}")),
            }
        };
        if let Some(path) = config {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            for (k, v) in parse_config(&text)? {
                set(k, v)?;
            }
        }
        for (k, v) in overrides {
            if let Some(v) = v {
                set(normalize_key(k), v.clone())?;
            }
        }
        Ok(Self { command: command.to_string(), values })
    }

    pub fn has(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).unwrap_or_else(|| panic!("setting {key} has no default"))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> CliResult<T>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .parse()
            .map_err(|e| CliError::Usage(format!("setting {key}={:?}: {e}", self.raw(key))))
    }

    pub fn get_bool(&self, key: &str) -> CliResult<bool> {
        match self.raw(key) {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" => Ok(false),
            other => usage(format!("setting {key}={other:?} is not a boolean")),
        }
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> CliResult<Vec<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse().map_err(|e| CliError::Usage(format!("setting {key}: bad item {s:?}: {e}"))))
            .collect()
    }

    /// A count where `all` (or `0`) means no limit, returned as `None`.
    pub fn get_limit(&self, key: &str) -> CliResult<Option<usize>> {
        limit(key, self.raw(key))
    }

    pub fn get_limit_list(&self, key: &str) -> CliResult<Vec<Option<usize>>> {
        self.raw(key).split(',').map(|s| limit(key, s.trim())).collect()
    }

    /// SHA-256 of the command name and the sorted resolved table.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        h.update(format!("command={}\n", self.command));
        for (k, v) in &self.values {
            h.update(format!("{k}={v}\n"));
        }
        format!("{:x}", h.finalize())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

fn limit(key: &str, s: &str) -> CliResult<Option<usize>> {
    if s == "all" {
        return Ok(None);
    }
    match s.parse::<usize>() {
        Ok(0) => Ok(None),
        Ok(k) => Ok(Some(k)),
        Err(e) => usage(format!("setting {key}: bad count {s:?}: {e}")),
    }
}
