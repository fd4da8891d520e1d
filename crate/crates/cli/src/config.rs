use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, Result};

/// Read a JSON document; a missing file is an I/O error, bad JSON a config
/// error.
pub fn load(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Schema(format!("{}: {e}", path.display())))
}

/// Deserialize with the JSON path of the first offending field in the
/// error message.
pub fn parse<T: DeserializeOwned>(value: &Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        CliError::Schema(format!("at `{path}`: {}", e.into_inner()))
    })
}

pub fn to_value(v: &impl Serialize) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| CliError::Schema(e.to_string()))
}

/// Fill `seed` into the object at `pointer` (created if missing) unless
/// the config already sets one there.
pub fn default_seed(value: &mut Value, pointer: &str, seed: u64) -> Result<()> {
    if value.pointer(pointer).is_none() {
        let key = pointer.trim_start_matches('/');
        match value {
            Value::Object(map) if !key.contains('/') => {
                map.insert(key.into(), Value::Object(Default::default()));
            }
            _ => return Err(CliError::Schema(format!("config must be an object with `{key}`"))),
        }
    }
    match value.pointer_mut(pointer) {
        Some(Value::Object(map)) => {
            map.entry("seed").or_insert(Value::from(seed));
            Ok(())
        }
        _ => Err(CliError::Schema(format!("`{}` must be an object", pointer.trim_start_matches('/')))),
    }
}
