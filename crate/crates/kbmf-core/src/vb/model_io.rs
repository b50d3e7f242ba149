//! Model persistence: a single JSON document holding the variant tag,
//! hyperparameters, posterior means and covariances, the ELBO trace, and a
//! format-version field. Serialization is deterministic, so save→load→save
//! reproduces the bytes.

use std::path::Path;

use super::{KbmfModel, MODEL_FORMAT_VERSION};
use crate::error::{KbmfError, Result};
use crate::io::atomic_write;

pub fn to_json_string(model: &KbmfModel) -> Result<String> {
    serde_json::to_string_pretty(model)
        .map_err(|e| KbmfError::Data(format!("model serialization failed: {e}")))
}

pub fn save_json(model: &KbmfModel, path: &Path) -> Result<()> {
    let mut text = to_json_string(model)?;
    text.push('\n');
    atomic_write(path, text.as_bytes())
}

pub fn load_json(path: &Path) -> Result<KbmfModel> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| KbmfError::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let model: KbmfModel = serde_json::from_str(&text)
        .map_err(|e| KbmfError::Data(format!("{}: invalid model JSON: {e}", path.display())))?;
    if model.format_version != MODEL_FORMAT_VERSION {
        return Err(KbmfError::Data(format!(
            "{}: model format version {} unsupported (expected {})",
            path.display(),
            model.format_version,
            MODEL_FORMAT_VERSION
        )));
    }
    Ok(model)
}
