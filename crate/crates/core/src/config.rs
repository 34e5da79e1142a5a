//! TOML configuration files with dotted `key=value` overrides.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Parse the right-hand side of an override as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Apply `a.b.c=value` overrides in order. Intermediate tables are created as needed.
pub fn apply_overrides(table: &mut toml::Table, overrides: &[String]) -> Result<()> {
    for ov in overrides {
        let (key, raw) = ov
            .split_once('=')
            .ok_or_else(|| Error::config(ov.clone(), "override must have the form key=value"))?;
        let key = key.trim();
        let path: Vec<&str> = key.split('.').collect();
        if path.iter().any(|p| p.is_empty()) {
            return Err(Error::config(key, "empty path segment"));
        }
        let mut node = &mut *table;
        for seg in &path[..path.len() - 1] {
            let entry = node.entry(seg.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
            node = entry
                .as_table_mut()
                .ok_or_else(|| Error::config(key, format!("`{seg}` is not a table")))?;
        }
        node.insert(path[path.len() - 1].to_string(), parse_value(raw.trim()));
    }
    Ok(())
}

/// Defaults, then the file at `path` (if any), then `overrides`.
pub fn load<C: Serialize + DeserializeOwned + Default>(path: Option<&Path>, overrides: &[String]) -> Result<C> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            toml::from_str::<toml::Table>(&text).map_err(|e| Error::config(p.display().to_string(), e.to_string()))?
        }
        None => toml::Table::new(),
    };
    apply_overrides(&mut table, overrides)?;
    // fields absent from the table take their defaults via `#[serde(default)]`
    C::deserialize(toml::Value::Table(table)).map_err(|e| Error::config("config", e.to_string().trim().to_string()))
}

pub fn from_toml_str<C: DeserializeOwned>(text: &str) -> Result<C> {
    toml::from_str(text).map_err(|e| Error::config("config", e.to_string().trim().to_string()))
}

pub fn to_toml_string<C: Serialize>(c: &C) -> String {
    toml::to_string(c).expect("configs serialize to TOML")
}

pub fn save<C: Serialize>(c: &C, path: &Path) -> Result<()> {
    std::fs::write(path, to_toml_string(c)).map_err(|e| Error::io(path, e))
}

/// Hex SHA-256 of the canonical TOML form.
pub fn config_hash<C: Serialize>(c: &C) -> String {
    let digest = Sha256::digest(to_toml_string(c).as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
