//! Flag/config merging. Every verb's flags are `Option`s; the JSON config
//! supplies values for flags left unset, and `PROBE_SEED` backs `--seed`.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

pub const SEED_ENV: &str = "PROBE_SEED";

/// Overlays the non-null fields of `flags` onto the config at `path`.
pub fn merge<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T> {
    let mut base = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
            match serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))? {
                Value::Object(map) => map,
                _ => bail!("config {} must hold a JSON object", path.display()),
            }
        }
        None => Map::new(),
    };
    if let Value::Object(set) = serde_json::to_value(flags)? {
        for (k, v) in set {
            if !v.is_null() {
                base.insert(k, v);
            }
        }
    }
    serde_json::from_value(Value::Object(base)).context("config does not match the command's options")
}

/// Flag or config seed, else `PROBE_SEED`, else 0.
pub fn resolve_seed(merged: Option<u64>) -> Result<u64> {
    if let Some(s) = merged {
        return Ok(s);
    }
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().with_context(|| format!("{SEED_ENV}={v} is not an unsigned integer")),
        Err(_) => Ok(0),
    }
}

/// Parses a kebab-case enum through its serde representation.
pub fn parse_enum<T: DeserializeOwned>(what: &str, s: &str) -> Result<T> {
    serde_json::from_value(Value::String(s.to_string())).with_context(|| format!("unknown {what} `{s}`"))
}
