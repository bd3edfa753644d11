use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ClassifierModel;
use crate::{Error, Result};

pub const MODEL_MAGIC: &str = "EXPLAINBENCH-MODEL";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize)]
struct ContainerOut<'a> {
    magic: &'a str,
    format_version: u32,
    model: &'a ClassifierModel,
}

#[derive(Deserialize)]
struct ContainerIn {
    magic: String,
    format_version: u32,
    model: serde_json::Value,
}

/// Write a self-describing JSON model container.
pub fn save_model(model: &ClassifierModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let body = serde_json::to_vec(&ContainerOut {
        magic: MODEL_MAGIC,
        format_version: MODEL_FORMAT_VERSION,
        model,
    })?;
    std::fs::write(path, body).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ClassifierModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let container: ContainerIn = serde_json::from_slice(&bytes)
        .map_err(|e| Error::ModelFile(format!("{}: not a model container ({e})", path.display())))?;
    if container.magic != MODEL_MAGIC {
        return Err(Error::ModelFile(format!("{}: bad magic '{}'", path.display(), container.magic)));
    }
    if container.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFile(format!(
            "{}: format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
            path.display(),
            container.format_version
        )));
    }
    let model: ClassifierModel = serde_json::from_value(container.model)
        .map_err(|e| Error::ModelFile(format!("{}: corrupt model body ({e})", path.display())))?;
    let recomputed = model.content_hash()?;
    if recomputed != model.model_id {
        return Err(Error::ModelFile(format!(
            "{}: content hash {recomputed} does not match stored model id {}",
            path.display(),
            model.model_id
        )));
    }
    Ok(model)
}
