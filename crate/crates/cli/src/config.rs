//! Config files, flag overrides and run manifests.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_VERSION: u32 = 1;

/// Loads `path` (a config object, or a manifest whose `config` is replayed)
/// and overlays every flag that was given.
pub fn resolve<A: Serialize + DeserializeOwned>(path: Option<&Path>, flags: &A) -> Result<(A, Value), CliError> {
    let mut merged = match path {
        None => Map::new(),
        Some(p) => load_object(p)?,
    };
    let Value::Object(over) = serde_json::to_value(flags).map_err(|e| CliError::validation(format!("flags: {e}")))?
    else {
        unreachable!("flag structs serialize to objects")
    };
    merged.extend(over);
    let merged = Value::Object(merged);
    let args = serde_json::from_value(merged.clone()).map_err(|e| CliError::validation(format!("config: {e}")))?;
    Ok((args, merged))
}

fn load_object(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::validation(format!("config: cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::validation(format!("config: {} is not valid JSON: {e}", path.display())))?;
    let mut obj = match value {
        Value::Object(o) => o,
        _ => return Err(CliError::validation(format!("config: {} must hold a JSON object", path.display()))),
    };
    if obj.contains_key("manifest_version") {
        return match obj.remove("config") {
            Some(Value::Object(c)) => Ok(c),
            _ => Err(CliError::validation("config: manifest has no config object".into())),
        };
    }
    Ok(obj)
}

/// SHA-256 of the compact serialization. serde_json keeps object keys
/// sorted, so equal configs hash equally.
pub fn config_hash(config: &Value) -> String {
    hex::encode(Sha256::digest(config.to_string().as_bytes()))
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub manifest_version: u32,
    pub command: &'a str,
    pub config: &'a Value,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub versions: Versions,
    pub threads: usize,
    pub outputs: Vec<PathBuf>,
    #[serde(skip_serializing_if = "Value::is_null")]
    pub summary: Value,
}

#[derive(Debug, Serialize)]
pub struct Versions {
    pub curveforge: &'static str,
    pub curve_format: u32,
    pub manifest: u32,
}

impl<'a> Manifest<'a> {
    pub fn new(command: &'a str, config: &'a Value, seed: Option<u64>) -> Self {
        Self {
            manifest_version: MANIFEST_VERSION,
            command,
            config,
            config_hash: config_hash(config),
            seed,
            versions: Versions {
                curveforge: env!("CARGO_PKG_VERSION"),
                curve_format: curveforge::io::CURVE_FORMAT_VERSION,
                manifest: MANIFEST_VERSION,
            },
            threads: rayon::current_num_threads(),
            outputs: Vec::new(),
            summary: Value::Null,
        }
    }
}

/// `out.csv` → `out.manifest.json`.
pub fn manifest_path(primary: &Path) -> PathBuf {
    primary.with_extension("manifest.json")
}
