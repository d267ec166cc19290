//! JSON run configuration. The file holds an optional top-level `threads`
//! and one flat object per command; command-line flags win over the file.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::exit::{CliError, CliResult};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub threads: Option<usize>,
    pub propagate: Option<Map<String, Value>>,
    pub run4f: Option<Map<String, Value>>,
    pub layer: Option<Map<String, Value>>,
    pub crosstalk: Option<Map<String, Value>>,
    pub analyze: Option<Map<String, Value>>,
    pub compare: Option<Map<String, Value>>,
    pub forward: Option<Map<String, Value>>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    pub fn section(&self, command: &str) -> Option<&Map<String, Value>> {
        match command {
            "propagate" => self.propagate.as_ref(),
            "run4f" => self.run4f.as_ref(),
            "layer" => self.layer.as_ref(),
            "crosstalk" => self.crosstalk.as_ref(),
            "analyze" => self.analyze.as_ref(),
            "compare" => self.compare.as_ref(),
            "forward" => self.forward.as_ref(),
            _ => None,
        }
    }
}

fn object(value: &impl Serialize) -> CliResult<Map<String, Value>> {
    match serde_json::to_value(value) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(CliError::config("expected an object")),
        Err(e) => Err(CliError::config(e.to_string())),
    }
}

/// Combine command-line `flags` with a config `section`. Every key in the
/// section must name a flag; flags that were given replace section values.
pub fn merge<T: Serialize + DeserializeOwned>(
    flags: &T,
    section: Option<&Map<String, Value>>,
    command: &str,
) -> CliResult<T> {
    let flag_map = object(flags)?;
    let mut merged = Map::new();
    if let Some(section) = section {
        for (key, value) in section {
            if !flag_map.contains_key(key) {
                return Err(CliError::config(format!(
                    "unknown key {key:?} in [{command}] config section"
                )));
            }
            merged.insert(key.clone(), value.clone());
        }
    }
    for (key, value) in flag_map {
        if !value.is_null() {
            merged.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(merged))
        .map_err(|e| CliError::config(format!("[{command}] config: {e}")))
}

/// Fill `base` with every non-null field of `overrides` and deserialize the
/// result. The override keys must be a subset of the fields of `T`.
pub fn overlay<T: Serialize + DeserializeOwned>(
    base: &T,
    overrides: &impl Serialize,
) -> CliResult<T> {
    let mut merged = object(base)?;
    for (key, value) in object(overrides)? {
        if !value.is_null() {
            merged.insert(key, value);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::config(e.to_string()))
}

pub fn require<T>(value: Option<T>, flag: &str) -> CliResult<T> {
    value.ok_or_else(|| CliError::config(format!("missing required option --{flag}")))
}

/// Fail with an I/O status before any computation if an input is missing.
pub fn check_inputs<'a>(paths: impl IntoIterator<Item = &'a PathBuf>) -> CliResult<()> {
    for p in paths {
        if !p.is_file() {
            return Err(CliError::io(format!("{}: no such file", p.display())));
        }
    }
    Ok(())
}
