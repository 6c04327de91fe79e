//! JSON checkpoints.
//!
//! A checkpoint is a single JSON object:
//!
//! ```text
//! { "format": "iwl-checkpoint", "version": 1, "kind": "<model kind>", "model": { ... } }
//! ```
//!
//! `model` is the serde encoding of the saved value. For a [`DenseNetwork`]
//! that is its ordered layer list, each layer tagged by `kind` and carrying
//! its parameter arrays and, for batch norm, running statistics.
//!
//! [`DenseNetwork`]: super::DenseNetwork

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "iwl-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    version: u32,
    kind: String,
    model: T,
}

pub fn save<T: Serialize>(path: &Path, kind: &str, value: &T) -> Result<()> {
    let envelope = Envelope {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        kind: kind.to_string(),
        model: value,
    };
    let text = serde_json::to_string(&envelope).map_err(|e| Error::Checkpoint(e.to_string()))?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load<T: DeserializeOwned>(path: &Path, kind: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let envelope: Envelope<T> =
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(e.to_string()))?;
    if envelope.format != CHECKPOINT_FORMAT || envelope.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported checkpoint {} v{}",
            envelope.format, envelope.version
        )));
    }
    if envelope.kind != kind {
        return Err(Error::Checkpoint(format!(
            "expected a {kind} checkpoint, found {}",
            envelope.kind
        )));
    }
    Ok(envelope.model)
}
