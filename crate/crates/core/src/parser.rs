//! Draft file parsing and hierarchy flattening.

use std::collections::HashMap;

use serde_json::Value;
use thiserror::Error;

use crate::draft::{validate_draft, wire, DesignDraft, LayerType, Rgb, ValidationReport};
use crate::geometry::Rect;

#[derive(Debug, Error)]
pub enum DraftError {
    #[error("malformed JSON at byte {offset} (line {line}, column {column}): {message}")]
    Json {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid draft: {0}")]
    Invalid(ValidationReport),
}

/// Parses a draft file, rejecting anything that fails validation.
pub fn parse_draft(bytes: &[u8]) -> Result<DesignDraft, DraftError> {
    parse_draft_with_warnings(bytes).map(|(draft, _)| draft)
}

/// Like [`parse_draft`], also returning the dotted paths of ignored unknown keys.
pub fn parse_draft_with_warnings(bytes: &[u8]) -> Result<(DesignDraft, Vec<String>), DraftError> {
    let value: Value = serde_json::from_slice(bytes).map_err(|e| json_error(bytes, &e))?;

    let mut unknown = Vec::new();
    collect_unknown_keys(&value, &mut unknown);
    for path in &unknown {
        log::warn!("ignoring unknown key `{path}`");
    }

    let file: wire::DraftFile = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        DraftError::Schema {
            path,
            message: e.into_inner().to_string(),
        }
    })?;
    let draft = DesignDraft::from(file);
    let report = validate_draft(&draft);
    if !report.is_valid() {
        return Err(DraftError::Invalid(report));
    }
    Ok((draft, unknown))
}

fn json_error(bytes: &[u8], e: &serde_json::Error) -> DraftError {
    let (line, column) = (e.line(), e.column());
    DraftError::Json {
        offset: byte_offset(bytes, line, column),
        line,
        column,
        message: e.to_string(),
    }
}

/// Converts serde_json's 1-based line/column (column counts bytes) into a byte offset.
fn byte_offset(bytes: &[u8], line: usize, column: usize) -> usize {
    let line_start = if line <= 1 {
        0
    } else {
        bytes
            .iter()
            .enumerate()
            .filter(|(_, &b)| b == b'\n')
            .nth(line - 2)
            .map_or(bytes.len(), |(i, _)| i + 1)
    };
    (line_start + column.saturating_sub(1)).min(bytes.len())
}

fn collect_unknown_keys(value: &Value, out: &mut Vec<String>) {
    let Some(top) = value.as_object() else {
        return;
    };
    check_keys(top, wire::DRAFT_KEYS, "", out);
    if let Some(ab) = top.get("artboard").and_then(Value::as_object) {
        check_keys(ab, wire::ARTBOARD_KEYS, "artboard.", out);
    }
    if let Some(layers) = top.get("layers").and_then(Value::as_array) {
        collect_layer_keys(layers, "layers", out);
    }
    if let Some(gt) = top.get("ground_truth").and_then(Value::as_array) {
        for (i, b) in gt.iter().enumerate() {
            if let Some(obj) = b.as_object() {
                check_keys(obj, wire::RECT_KEYS, &format!("ground_truth[{i}]."), out);
            }
        }
    }
}

fn collect_layer_keys(layers: &[Value], prefix: &str, out: &mut Vec<String>) {
    for (i, layer) in layers.iter().enumerate() {
        let Some(obj) = layer.as_object() else {
            continue;
        };
        let here = format!("{prefix}[{i}]");
        check_keys(obj, wire::LAYER_KEYS, &format!("{here}."), out);
        if let Some(children) = obj.get("children").and_then(Value::as_array) {
            collect_layer_keys(children, &format!("{here}.children"), out);
        }
    }
}

fn check_keys(
    obj: &serde_json::Map<String, Value>,
    known: &[&str],
    prefix: &str,
    out: &mut Vec<String>,
) {
    out.extend(
        obj.keys()
            .filter(|k| !known.contains(&k.as_str()))
            .map(|k| format!("{prefix}{k}")),
    );
}

/// A drawable layer with its paint position assigned.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatLayer {
    pub id: String,
    pub name: String,
    pub layer_type: LayerType,
    pub rect: Rect,
    pub fill: Option<Rgb>,
    pub z_index: usize,
}

/// Drawable layers in bottom-to-top paint order, indexed by id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlatLayerList {
    layers: Vec<FlatLayer>,
    by_id: HashMap<String, usize>,
}

impl FlatLayerList {
    /// Wraps an already ordered list. `z_index` values are kept as given.
    pub fn from_layers(layers: Vec<FlatLayer>) -> Self {
        let by_id = layers
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.clone(), i))
            .collect();
        Self { layers, by_id }
    }

    pub fn layers(&self) -> &[FlatLayer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<FlatLayer> {
        self.layers
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&FlatLayer> {
        self.by_id.get(id).map(|&i| &self.layers[i])
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, FlatLayer> {
        self.layers.iter()
    }
}

impl<'a> IntoIterator for &'a FlatLayerList {
    type Item = &'a FlatLayer;
    type IntoIter = std::slice::Iter<'a, FlatLayer>;

    fn into_iter(self) -> Self::IntoIter {
        self.layers.iter()
    }
}

/// Discards the designer hierarchy and keeps only paint order: a depth-first
/// walk, parent before children, groups dropped, `z_index` assigned from 0.
pub fn flatten_layers(draft: &DesignDraft) -> FlatLayerList {
    let mut layers = Vec::new();
    draft.walk(|l| {
        if l.is_drawable() {
            layers.push(FlatLayer {
                id: l.id.clone(),
                name: l.name.clone(),
                layer_type: l.layer_type,
                rect: l.rect,
                fill: l.fill,
                z_index: layers.len(),
            });
        }
    });
    FlatLayerList::from_layers(layers)
}
