//! Design-draft domain types and the versioned draft JSON schema.
//!
//! A draft is an artboard plus an ordered tree of layers. Document order is
//! paint order: earlier siblings are painted first, children after their
//! parent. Layers whose name contains the merge marker (case-insensitive
//! `merge`, which covers the `#merge#` label convention) delimit the
//! ground-truth components.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::geometry::{enclosing, Rect};

pub const SCHEMA_VERSION: u32 = 1;

/// Fill used by the screenshot renderer when a layer declares none.
pub const DEFAULT_FILL: Rgb = Rgb::new(128, 128, 128);

const MERGE_MARKER: &str = "merge";

/// Case-insensitive merge-marker test on a layer name.
pub fn is_merge_marked(name: &str) -> bool {
    name.to_lowercase().contains(MERGE_MARKER)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerType {
    Shape,
    Image,
    Text,
    Group,
    #[serde(other)]
    Other,
}

/// 8-bit RGB color, serialized as `#rrggbb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    pub fn parse_hex(s: &str) -> Option<Self> {
        let hex = s.strip_prefix('#')?;
        if hex.len() != 6 || !hex.is_ascii() {
            return None;
        }
        let channel = |i: usize| u8::from_str_radix(&hex[i..i + 2], 16).ok();
        Some(Self::new(channel(0)?, channel(2)?, channel(4)?))
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

impl Serialize for Rgb {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Rgb::parse_hex(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid color {s:?}, expected #rrggbb")))
    }
}

/// One node of the layer tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub id: String,
    pub name: String,
    pub layer_type: LayerType,
    pub rect: Rect,
    pub fill: Option<Rgb>,
    /// Accepted from the source document and carried through untouched.
    pub boolean_operation: Option<String>,
    /// Ids of the layers a merged layer replaced; empty for ordinary layers.
    pub merged_from: Vec<String>,
    pub children: Vec<Layer>,
}

impl Layer {
    pub fn new(id: impl Into<String>, name: impl Into<String>, layer_type: LayerType, rect: Rect) -> Self {
        Self {
            id: id.into(),
            name: name.into(),
            layer_type,
            rect,
            fill: None,
            boolean_operation: None,
            merged_from: Vec::new(),
            children: Vec::new(),
        }
    }

    pub fn with_fill(mut self, fill: Rgb) -> Self {
        self.fill = Some(fill);
        self
    }

    pub fn with_children(mut self, children: Vec<Layer>) -> Self {
        self.children = children;
        self
    }

    /// Groups are structural only; every other layer type paints.
    pub fn is_drawable(&self) -> bool {
        self.layer_type != LayerType::Group
    }

    pub fn is_merge_marked(&self) -> bool {
        is_merge_marked(&self.name)
    }

    /// Pre-order walk over this layer and its descendants.
    pub fn walk<'a>(&'a self, visit: &mut impl FnMut(&'a Layer)) {
        visit(self);
        for child in &self.children {
            child.walk(visit);
        }
    }

    /// Drawable layers of this subtree in paint order.
    pub fn drawable_descendants(&self) -> Vec<&Layer> {
        let mut out = Vec::new();
        self.walk(&mut |l| {
            if l.is_drawable() {
                out.push(l);
            }
        });
        out
    }
}

/// A set of layers asserted to form one UI component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeGroup {
    /// Member layer ids in paint order.
    pub member_ids: Vec<String>,
    pub enclosing: Rect,
    pub source_box: Rect,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignDraft {
    pub schema_version: u32,
    pub name: Option<String>,
    /// Always anchored at the origin.
    pub artboard: Rect,
    pub layers: Vec<Layer>,
    pub ground_truth: Vec<Rect>,
}

impl DesignDraft {
    /// Builds a draft and harvests its ground truth from merge-marked layers.
    pub fn new(width: f64, height: f64, layers: Vec<Layer>) -> Self {
        let mut draft = Self {
            schema_version: SCHEMA_VERSION,
            name: None,
            artboard: Rect::new(0.0, 0.0, width, height),
            layers,
            ground_truth: Vec::new(),
        };
        draft.ground_truth = harvest_ground_truth(&draft);
        draft
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Pre-order walk over every layer in the tree.
    pub fn walk<'a>(&'a self, mut visit: impl FnMut(&'a Layer)) {
        for layer in &self.layers {
            layer.walk(&mut visit);
        }
    }

    pub fn drawable_count(&self) -> usize {
        let mut n = 0;
        self.walk(|l| {
            if l.is_drawable() {
                n += 1;
            }
        });
        n
    }

    pub fn find(&self, id: &str) -> Option<&Layer> {
        let mut found = None;
        self.walk(|l| {
            if found.is_none() && l.id == id {
                found = Some(l);
            }
        });
        found
    }
}

/// Outermost merge-marked layers in document order. Marked layers nested in a
/// marked ancestor belong to the ancestor's component.
fn marked_roots<'a>(layers: &'a [Layer], out: &mut Vec<&'a Layer>) {
    for layer in layers {
        if layer.is_merge_marked() {
            out.push(layer);
        } else {
            marked_roots(&layer.children, out);
        }
    }
}

fn component_extent(layer: &Layer) -> Rect {
    let drawable = layer.drawable_descendants();
    enclosing(drawable.iter().map(|l| &l.rect)).unwrap_or(layer.rect)
}

/// Ground-truth boxes: the tight union of each marked component's drawable
/// layers. Zero-area components are skipped.
pub fn harvest_ground_truth(draft: &DesignDraft) -> Vec<Rect> {
    let mut roots = Vec::new();
    marked_roots(&draft.layers, &mut roots);
    roots
        .into_iter()
        .filter_map(|layer| {
            let extent = component_extent(layer);
            if extent.area() > 0.0 {
                Some(extent)
            } else {
                log::warn!("merge-marked layer {:?} has zero area, no ground-truth box", layer.id);
                None
            }
        })
        .collect()
}

/// Ground-truth layer groups, one per marked component with at least one
/// drawable member.
pub fn ground_truth_groups(draft: &DesignDraft) -> Vec<MergeGroup> {
    let mut roots = Vec::new();
    marked_roots(&draft.layers, &mut roots);
    roots
        .into_iter()
        .filter_map(|layer| {
            let members = layer.drawable_descendants();
            let extent = enclosing(members.iter().map(|l| &l.rect))?;
            Some(MergeGroup {
                member_ids: members.iter().map(|l| l.id.clone()).collect(),
                enclosing: extent,
                source_box: extent,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    SchemaVersion,
    ArtboardExtent,
    EmptyId,
    DuplicateId,
    NegativeExtent,
    NonFiniteGeometry,
    DegenerateGroundTruth,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub layer_id: Option<String>,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.layer_id {
            Some(id) => write!(f, "layer {id:?}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, rule: Rule) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }

    fn push(&mut self, layer_id: Option<&str>, rule: Rule, message: String) {
        self.violations.push(Violation {
            layer_id: layer_id.map(str::to_owned),
            rule,
            message,
        });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

/// Checks every structural invariant of a draft. Never fails; problems are
/// collected into the report.
pub fn validate_draft(draft: &DesignDraft) -> ValidationReport {
    let mut report = ValidationReport::default();
    if draft.schema_version != SCHEMA_VERSION {
        report.push(
            None,
            Rule::SchemaVersion,
            format!("unsupported schema_version {}", draft.schema_version),
        );
    }
    let ab = &draft.artboard;
    if !(ab.w > 0.0 && ab.h > 0.0 && ab.w.is_finite() && ab.h.is_finite()) {
        report.push(
            None,
            Rule::ArtboardExtent,
            format!("artboard must have positive finite extent, got {}x{}", ab.w, ab.h),
        );
    }

    let mut seen = HashSet::new();
    draft.walk(|layer| {
        let id = Some(layer.id.as_str());
        if layer.id.is_empty() {
            report.push(id, Rule::EmptyId, "empty layer id".into());
        } else if !seen.insert(layer.id.as_str()) {
            report.push(id, Rule::DuplicateId, "duplicate layer id".into());
        }
        if !layer.rect.is_finite() {
            report.push(id, Rule::NonFiniteGeometry, "non-finite coordinate".into());
        } else if layer.rect.has_negative_extent() {
            report.push(
                id,
                Rule::NegativeExtent,
                format!("negative extent {}x{}", layer.rect.w, layer.rect.h),
            );
        }
    });

    for (i, gt) in draft.ground_truth.iter().enumerate() {
        if !(gt.is_finite() && gt.w > 0.0 && gt.h > 0.0) {
            report.push(
                None,
                Rule::DegenerateGroundTruth,
                format!("ground_truth[{i}] must have positive area"),
            );
        }
    }
    report
}

/// Serde mirror of the draft file. Field names are the on-disk schema.
pub(crate) mod wire {
    use serde::{Deserialize, Serialize};

    use super::{LayerType, Rgb};
    use crate::geometry::Rect;

    pub const DRAFT_KEYS: &[&str] = &["schema_version", "name", "artboard", "layers", "ground_truth"];
    pub const ARTBOARD_KEYS: &[&str] = &["w", "h"];
    pub const LAYER_KEYS: &[&str] = &[
        "id",
        "name",
        "type",
        "x",
        "y",
        "w",
        "h",
        "fill",
        "boolean_operation",
        "merged_from",
        "children",
    ];
    pub const RECT_KEYS: &[&str] = &["x", "y", "w", "h"];

    #[derive(Debug, Serialize, Deserialize)]
    pub struct DraftFile {
        pub schema_version: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub name: Option<String>,
        pub artboard: Artboard,
        #[serde(default)]
        pub layers: Vec<LayerRecord>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub ground_truth: Option<Vec<Rect>>,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct Artboard {
        pub w: f64,
        pub h: f64,
    }

    #[derive(Debug, Serialize, Deserialize)]
    pub struct LayerRecord {
        pub id: String,
        pub name: String,
        #[serde(rename = "type")]
        pub layer_type: LayerType,
        pub x: f64,
        pub y: f64,
        pub w: f64,
        pub h: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub fill: Option<Rgb>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pub boolean_operation: Option<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        pub merged_from: Vec<String>,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        pub children: Vec<LayerRecord>,
    }
}

impl From<wire::LayerRecord> for Layer {
    fn from(r: wire::LayerRecord) -> Self {
        Layer {
            id: r.id,
            name: r.name,
            layer_type: r.layer_type,
            rect: Rect::new(r.x, r.y, r.w, r.h),
            fill: r.fill,
            boolean_operation: r.boolean_operation,
            merged_from: r.merged_from,
            children: r.children.into_iter().map(Layer::from).collect(),
        }
    }
}

impl From<&Layer> for wire::LayerRecord {
    fn from(l: &Layer) -> Self {
        wire::LayerRecord {
            id: l.id.clone(),
            name: l.name.clone(),
            layer_type: l.layer_type,
            x: l.rect.x,
            y: l.rect.y,
            w: l.rect.w,
            h: l.rect.h,
            fill: l.fill,
            boolean_operation: l.boolean_operation.clone(),
            merged_from: l.merged_from.clone(),
            children: l.children.iter().map(wire::LayerRecord::from).collect(),
        }
    }
}

impl From<wire::DraftFile> for DesignDraft {
    fn from(f: wire::DraftFile) -> Self {
        let mut draft = DesignDraft {
            schema_version: f.schema_version,
            name: f.name,
            artboard: Rect::new(0.0, 0.0, f.artboard.w, f.artboard.h),
            layers: f.layers.into_iter().map(Layer::from).collect(),
            ground_truth: Vec::new(),
        };
        draft.ground_truth = match f.ground_truth {
            Some(gt) => gt,
            None => harvest_ground_truth(&draft),
        };
        draft
    }
}

impl From<&DesignDraft> for wire::DraftFile {
    fn from(d: &DesignDraft) -> Self {
        wire::DraftFile {
            schema_version: d.schema_version,
            name: d.name.clone(),
            artboard: wire::Artboard {
                w: d.artboard.w,
                h: d.artboard.h,
            },
            layers: d.layers.iter().map(wire::LayerRecord::from).collect(),
            ground_truth: Some(d.ground_truth.clone()),
        }
    }
}

/// Serializes a draft as pretty-printed JSON, ground truth included.
pub fn serialize_draft(draft: &DesignDraft) -> Vec<u8> {
    let mut out = serde_json::to_vec_pretty(&wire::DraftFile::from(draft))
        .expect("draft serialization is infallible");
    out.push(b'\n');
    out
}
