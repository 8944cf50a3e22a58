//! Model serialization.
//!
//! A checkpoint is a text file: one magic line, then a single-line JSON
//! body holding the architecture, hyperparameters, a content hash of the
//! tag inventory the model was trained against, the embedding provider
//! spec, and every parameter tensor (row-major `f64`, named as in
//! [`super::ModelParameters::tensors`]). JSON `f64` serialization uses
//! shortest-round-trip formatting, so save/load is bit-exact.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnnotatorKind, AnnotatorModel, ModelParameters};
use crate::corpus::TagInventory;
use crate::encoder::{EmbeddingProvider, ProviderSpec, Tensor};
use crate::error::{EdaError, Result};

/// First line of every checkpoint file.
pub const CHECKPOINT_MAGIC: &str = "DANA1";

const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointBody {
    format_version: u32,
    kind: String,
    hidden_dim: usize,
    classes: usize,
    /// FNV-1a hash of the tag inventory, as fixed-width hex.
    inventory_hash: String,
    provider: ProviderSpec,
    tensors: BTreeMap<String, Tensor>,
}

fn hash_hex(h: u64) -> String {
    format!("{h:016x}")
}

/// Write `model` to `path`.
pub fn save_checkpoint(model: &AnnotatorModel, path: &Path) -> Result<()> {
    if !model.params.is_finite() {
        return Err(EdaError::Checkpoint(
            "refusing to save non-finite parameters".into(),
        ));
    }
    let tensors: BTreeMap<String, Tensor> = model
        .params
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.clone()))
        .collect();
    let body = CheckpointBody {
        format_version: FORMAT_VERSION,
        kind: model.kind().label().to_string(),
        hidden_dim: model.hidden_dim(),
        classes: model.num_classes(),
        inventory_hash: hash_hex(model.inventory().content_hash()),
        provider: model.provider().spec(),
        tensors,
    };
    let json = serde_json::to_string(&body)
        .map_err(|e| EdaError::Checkpoint(format!("serialization failed: {e}")))?;
    let content = format!("{CHECKPOINT_MAGIC}\n{json}\n");
    std::fs::write(path, content).map_err(|e| EdaError::io(path, e))
}

/// Read a checkpoint back. The caller's `inventory` must hash-match the one
/// the model was saved with; the embedding provider is rebuilt from its
/// spec (re-reading the embedding file for file-backed providers).
pub fn load_checkpoint(path: &Path, inventory: &TagInventory) -> Result<AnnotatorModel> {
    let content = std::fs::read_to_string(path).map_err(|e| EdaError::io(path, e))?;
    let Some((magic, json)) = content.split_once('\n') else {
        return Err(EdaError::Checkpoint(format!(
            "{}: missing magic line",
            path.display()
        )));
    };
    if magic != CHECKPOINT_MAGIC {
        return Err(EdaError::Checkpoint(format!(
            "{}: bad magic '{magic}' (expected '{CHECKPOINT_MAGIC}')",
            path.display()
        )));
    }
    let body: CheckpointBody = serde_json::from_str(json.trim_end())
        .map_err(|e| EdaError::Checkpoint(format!("{}: malformed body: {e}", path.display())))?;
    if body.format_version != FORMAT_VERSION {
        return Err(EdaError::Checkpoint(format!(
            "{}: unsupported format version {}",
            path.display(),
            body.format_version
        )));
    }
    let kind = AnnotatorKind::parse(&body.kind).ok_or_else(|| {
        EdaError::Checkpoint(format!(
            "{}: unknown annotator kind '{}'",
            path.display(),
            body.kind
        ))
    })?;
    let expected_hash = hash_hex(inventory.content_hash());
    if body.inventory_hash != expected_hash {
        return Err(EdaError::InventoryMismatch(format!(
            "checkpoint {} was saved with tag inventory {}, but the current inventory hashes to {}",
            path.display(),
            body.inventory_hash,
            expected_hash
        )));
    }
    if body.classes != inventory.num_classes() {
        return Err(EdaError::InventoryMismatch(format!(
            "checkpoint {} has {} classes, inventory has {}",
            path.display(),
            body.classes,
            inventory.num_classes()
        )));
    }
    let provider = EmbeddingProvider::from_spec(&body.provider)?;

    let mut params =
        ModelParameters::zeros(kind, provider.dim(), body.hidden_dim, body.classes);
    let expected: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
    for name in &expected {
        if !body.tensors.contains_key(name) {
            return Err(EdaError::Checkpoint(format!(
                "{}: missing tensor '{name}'",
                path.display()
            )));
        }
    }
    for name in body.tensors.keys() {
        if !expected.contains(name) {
            return Err(EdaError::Checkpoint(format!(
                "{}: unexpected tensor '{name}' for kind '{}'",
                path.display(),
                body.kind
            )));
        }
    }
    for (name, tensor) in params.tensors_mut() {
        let stored = &body.tensors[&name];
        if stored.rows != tensor.rows || stored.cols != tensor.cols {
            return Err(EdaError::Checkpoint(format!(
                "{}: tensor '{name}' has shape {}x{}, expected {}x{}",
                path.display(),
                stored.rows,
                stored.cols,
                tensor.rows,
                tensor.cols
            )));
        }
        if !stored.is_finite() {
            return Err(EdaError::Checkpoint(format!(
                "{}: tensor '{name}' contains non-finite values",
                path.display()
            )));
        }
        *tensor = stored.clone();
    }

    Ok(AnnotatorModel::from_parts(
        kind,
        body.hidden_dim,
        inventory.clone(),
        provider,
        params,
    ))
}
