//! Versioned JSON model file.

use std::fs;
use std::path::Path;

use mpboost::MinipatchEnsemble64;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub model: MinipatchEnsemble64,
}

pub fn to_string(model: &MinipatchEnsemble64) -> String {
    #[derive(Serialize)]
    struct Borrowed<'a> {
        format_version: u32,
        model: &'a MinipatchEnsemble64,
    }
    let mut text = serde_json::to_string_pretty(&Borrowed {
        format_version: FORMAT_VERSION,
        model,
    })
    .expect("model serializes");
    text.push('\n');
    text
}

pub fn from_str(text: &str) -> Result<MinipatchEnsemble64, CliError> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| CliError::Model(format!("not valid JSON: {e}")))?;
    match value.get("format_version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(CliError::Model(format!(
                "format version {v} is not supported (expected {FORMAT_VERSION})"
            )))
        }
        None => return Err(CliError::Model("missing format_version".into())),
    }
    let file: ModelFile = serde_json::from_value(value).map_err(|e| CliError::Model(e.to_string()))?;
    file.model.validate().map_err(|e| CliError::Model(e.to_string()))?;
    Ok(file.model)
}

pub fn save(model: &MinipatchEnsemble64, path: &Path) -> Result<(), CliError> {
    fs::write(path, to_string(model)).map_err(CliError::io(path))
}

pub fn load(path: &Path) -> Result<MinipatchEnsemble64, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path))?;
    from_str(&text)
}
