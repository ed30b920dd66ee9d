//! Parameter resolution: command-line flag, then config file, then default.
//!
//! A config file is flat `key = value` text (`#` starts a comment). A run
//! manifest (JSON) is accepted in its place, so a run can be replayed from
//! the manifest it wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// Command recorded in a replayed manifest.
    pub command: Option<String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Parse(format!("config {}: {e}", path.display())))?;
        if text.trim_start().starts_with('{') {
            Self::from_manifest(&text)
        } else {
            Self::parse(&text)
        }
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Parse(format!("config line {}: expected key = value", i + 1)))?;
            let key = normalize(k);
            if key.is_empty() {
                return Err(CliError::Parse(format!("config line {}: empty key", i + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Config { values, command: None })
    }

    fn from_manifest(text: &str) -> Result<Self, CliError> {
        let v: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Parse(format!("manifest: {e}")))?;
        let params = v
            .get("params")
            .and_then(|p| p.as_object())
            .ok_or_else(|| CliError::Parse("manifest has no params object".into()))?;
        let values = params
            .iter()
            .map(|(k, v)| {
                let s = match v {
                    serde_json::Value::String(s) => s.clone(),
                    other => other.to_string(),
                };
                (normalize(k), s)
            })
            .collect();
        Ok(Config {
            values,
            command: v.get("command").and_then(|c| c.as_str()).map(str::to_string),
        })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(&normalize(key)).map(String::as_str)
    }

    /// `cli` if given, else the parsed config entry, else `default`.
    pub fn resolve<T>(
        &self,
        key: &str,
        cli: Option<T>,
        parse: impl Fn(&str) -> Result<T, String>,
        default: T,
    ) -> Result<T, CliError> {
        if let Some(v) = cli {
            return Ok(v);
        }
        match self.get(key) {
            Some(s) => parse(s).map_err(|e| CliError::Parse(format!("config key '{key}': {e}"))),
            None => Ok(default),
        }
    }

    /// As [`Config::resolve`] with no default.
    pub fn resolve_opt<T>(
        &self,
        key: &str,
        cli: Option<T>,
        parse: impl Fn(&str) -> Result<T, String>,
    ) -> Result<Option<T>, CliError> {
        if cli.is_some() {
            return Ok(cli);
        }
        self.get(key)
            .map(|s| parse(s).map_err(|e| CliError::Parse(format!("config key '{key}': {e}"))))
            .transpose()
    }
}

/// Keys mirror flag names; `t-start`, `t_start` and `--t-start` are the same key.
fn normalize(k: &str) -> String {
    k.trim().trim_start_matches("--").replace('_', "-").to_ascii_lowercase()
}

pub fn parse_from_str<T: std::str::FromStr>(s: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    s.trim().parse::<T>().map_err(|e| format!("'{s}': {e}"))
}
