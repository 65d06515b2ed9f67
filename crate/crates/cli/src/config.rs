//! Layered configuration: built-in preset, then a JSON file, then flags.

use std::path::Path;

use fpcg_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Merges `file` and `overrides` (in that order) over `base`. Keys that the
/// base does not know are rejected with the dotted field name.
pub fn resolve<T: Serialize + DeserializeOwned>(
    base: &T,
    file: Option<&Path>,
    overrides: &[(String, Value)],
) -> Result<T> {
    let mut v = serde_json::to_value(base)?;
    if let Some(path) = file {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        let layer: Value = serde_json::from_str(&text).map_err(|e| Error::file(path, e))?;
        if !layer.is_object() {
            return Err(Error::file(path, "config must be a JSON object"));
        }
        merge(&mut v, layer, "")?;
    }
    for (key, value) in overrides {
        set_path(&mut v, key, value.clone())?;
    }
    serde_json::from_value(v).map_err(|e| Error::config("config", e.to_string()))
}

fn merge(base: &mut Value, layer: Value, prefix: &str) -> Result<()> {
    match (base, layer) {
        (Value::Object(b), Value::Object(l)) => merge_objects(b, l, prefix),
        (b, l) => {
            *b = l;
            Ok(())
        }
    }
}

fn merge_objects(base: &mut Map<String, Value>, layer: Map<String, Value>, prefix: &str) -> Result<()> {
    for (k, v) in layer {
        let name = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match base.get_mut(&k) {
            Some(slot) => merge(slot, v, &name)?,
            None => return Err(Error::config(name, "unknown field")),
        }
    }
    Ok(())
}

/// Replaces the value at a dotted path such as `noise.white.rel_amp`.
pub fn set_path(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = root;
    for part in key.split('.') {
        cur = cur
            .as_object_mut()
            .and_then(|o| o.get_mut(part))
            .ok_or_else(|| Error::config(key, "unknown field"))?;
    }
    *cur = value;
    Ok(())
}

/// Parses `key=value`; the value is read as JSON and falls back to a string.
pub fn parse_assignment(s: &str) -> std::result::Result<(String, Value), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use fpcg_core::synth::SimConfig;
    use serde_json::json;

    #[test]
    fn precedence() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"base_fhr": 150, "duration_s": 30}"#).unwrap();
        let c = resolve(&SimConfig::default(), Some(&path), &[("base_fhr".into(), json!(160.0))]).unwrap();
        assert_eq!(c.base_fhr, 160.0);
        assert_eq!(c.duration_s, 30.0);
        assert_eq!(c.fs, SimConfig::default().fs);
    }

    #[test]
    fn unknown_field_is_named() {
        let err = resolve(&SimConfig::default(), None, &[("noise.pink".into(), json!(1))]).unwrap_err();
        assert!(err.to_string().contains("noise.pink"), "{err}");
    }

    #[test]
    fn assignment_parsing() {
        assert_eq!(parse_assignment("a.b=0.5").unwrap(), ("a.b".into(), json!(0.5)));
        assert_eq!(parse_assignment("mode=hmm").unwrap(), ("mode".into(), json!("hmm")));
        assert!(parse_assignment("nothing").is_err());
    }
}
