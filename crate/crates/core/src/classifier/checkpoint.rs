//! JSON checkpoint.
//!
//! ```json
//! { "format_version": 1,
//!   "architecture": { "point": [3, 64, 128, 256], "head": [256, 128, C] },
//!   "params": [ ... ] }
//! ```
//!
//! `params` is [`ClassifierModel::to_flat`]: per layer (point layers first,
//! then head layers), the weight matrix row-major as `out × in`, then the bias.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Architecture, ClassifierModel};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Checkpoint {
    format_version: u32,
    architecture: Architecture,
    params: Vec<f64>,
}

pub fn save_model(model: &ClassifierModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ck = Checkpoint {
        format_version: CHECKPOINT_VERSION,
        architecture: model.architecture().clone(),
        params: model.to_flat(),
    };
    let text = serde_json::to_string(&ck)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ClassifierModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let ck: Checkpoint = serde_json::from_str(&text)?;
    if ck.format_version != CHECKPOINT_VERSION {
        return Err(Error::Invalid(format!(
            "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
            ck.format_version
        )));
    }
    ClassifierModel::from_flat(ck.architecture, &ck.params)
}
