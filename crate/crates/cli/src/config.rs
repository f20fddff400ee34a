//! Run configuration: defaults, then a JSON file, then `--set` overrides,
//! then `--seed`.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Bad flags or configuration. Maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Reads a JSON object file.
pub fn read_json_object(path: &Path) -> anyhow::Result<Map<String, Value>> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    match serde_json::from_str(&text) {
        Ok(Value::Object(map)) => Ok(map),
        Ok(_) => Err(usage(format!("{}: config must be a JSON object", path.display()))),
        Err(e) => Err(usage(format!("{}: {e}", path.display()))),
    }
}

/// Recursively overlays `top` onto `base`; objects merge, everything else
/// replaces.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies one `a.b.c=value` override. The value is parsed as JSON when
/// possible and taken as a string otherwise.
pub fn apply_set(root: &mut Value, assignment: &str) -> anyhow::Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| usage(format!("--set expects key=value, got `{assignment}`")))?;
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(usage(format!("--set: bad key path `{path}`")));
    }
    let mut node = root;
    for key in &keys[..keys.len() - 1] {
        node = match node {
            Value::Object(map) => map.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new())),
            _ => return Err(usage(format!("--set: `{path}` descends into a non-object"))),
        };
    }
    match node {
        Value::Object(map) => {
            map.insert(keys[keys.len() - 1].to_string(), value);
            Ok(())
        }
        _ => Err(usage(format!("--set: `{path}` descends into a non-object"))),
    }
}

/// Resolves a config of type `C`. Unknown keys are rejected by `C`'s
/// deserializer.
pub fn resolve<C>(file: Option<&Path>, sets: &[String], seed: Option<u64>) -> anyhow::Result<C>
where
    C: Default + Serialize + DeserializeOwned,
{
    let mut root = serde_json::to_value(C::default())?;
    if let Some(path) = file {
        merge(&mut root, Value::Object(read_json_object(path)?));
    }
    for s in sets {
        apply_set(&mut root, s)?;
    }
    if let Some(seed) = seed {
        apply_set(&mut root, &format!("seed={seed}"))?;
    }
    serde_json::from_value(root).map_err(|e| usage(format!("invalid config: {e}")))
}
