//! Grouping the layers inside predicted merging areas into components.
//!
//! Boxes are processed one at a time in a fixed order. For each box the
//! layers still unclaimed are filtered by how much of their own area lies
//! inside the box; the mean z-gap of the survivors becomes the distance
//! threshold; walking the survivors bottom to top, a layer joins the group
//! when its z-gap to the previous member is within the threshold. Claimed
//! layers leave the working list before the next box.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::draft::{DesignDraft, Layer, LayerType, MergeGroup};
use crate::geometry::{enclosing, rect_intersection_area, Rect};
use crate::parser::{flatten_layers, FlatLayer, FlatLayerList};

#[derive(Debug, Error, PartialEq)]
pub enum MergeError {
    #[error("intersection threshold must lie in (0, 1], got {0}")]
    Threshold(f64),
    #[error("cannot derive a distance threshold from an empty layer list")]
    EmptyFiltered,
    #[error("merge result references layer {0:?}, which is not a drawable layer of this draft")]
    StaleResult(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoxOrder {
    /// Reading order: top edge, then left edge.
    #[default]
    TopLeft,
    AreaAsc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceRule {
    #[default]
    MeanGap,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MergerConfig {
    /// Minimum fraction of a layer's own area that must fall inside the box.
    pub intersection_threshold: f64,
    pub box_order: BoxOrder,
    pub distance_rule: DistanceRule,
}

impl Default for MergerConfig {
    fn default() -> Self {
        Self {
            intersection_threshold: 0.7,
            box_order: BoxOrder::TopLeft,
            distance_rule: DistanceRule::MeanGap,
        }
    }
}

impl MergerConfig {
    pub fn validate(&self) -> Result<(), MergeError> {
        let t = self.intersection_threshold;
        if t > 0.0 && t <= 1.0 {
            Ok(())
        } else {
            Err(MergeError::Threshold(t))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeResult {
    pub groups: Vec<MergeGroup>,
    /// Layers no box claimed, in paint order with their original `z_index`.
    pub leftover: FlatLayerList,
}

/// Fraction of `layer`'s area inside `bx`. A zero-area layer counts as fully
/// inside when its center lies in the (closed) box and outside otherwise.
pub fn coverage(layer: &Rect, bx: &Rect) -> f64 {
    let area = layer.area();
    if area > 0.0 {
        rect_intersection_area(layer, bx) / area
    } else {
        let (cx, cy) = layer.center();
        if bx.contains_point(cx, cy) {
            1.0
        } else {
            0.0
        }
    }
}

/// Layers whose coverage by `bx` reaches `threshold`, order preserved.
pub fn filter_by_intersection<'a, I>(bx: &Rect, layers: I, threshold: f64) -> Vec<&'a FlatLayer>
where
    I: IntoIterator<Item = &'a FlatLayer>,
{
    layers
        .into_iter()
        .filter(|l| coverage(&l.rect, bx) >= threshold)
        .collect()
}

/// Mean gap between consecutive z-indices, `(z_last - z_first) / (K - 1)`;
/// infinite for a single layer.
pub fn distance_threshold(filtered: &[&FlatLayer]) -> Result<f64, MergeError> {
    match filtered {
        [] => Err(MergeError::EmptyFiltered),
        [_] => Ok(f64::INFINITY),
        [first, .., last] => {
            Ok((last.z_index - first.z_index) as f64 / (filtered.len() - 1) as f64)
        }
    }
}

/// Seeds a group with the first filtered layer and appends each later layer
/// whose z-gap to the previous member is at most `threshold`. Layers that fail
/// the test stay unclaimed.
pub fn group_by_distance(
    filtered: &[&FlatLayer],
    threshold: f64,
    source_box: Rect,
) -> Result<MergeGroup, MergeError> {
    let (first, rest) = filtered.split_first().ok_or(MergeError::EmptyFiltered)?;
    let mut members = vec![*first];
    for layer in rest {
        let previous = members.last().expect("group is seeded").z_index;
        if (layer.z_index - previous) as f64 <= threshold {
            members.push(layer);
        }
    }
    Ok(MergeGroup {
        member_ids: members.iter().map(|l| l.id.clone()).collect(),
        enclosing: enclosing(members.iter().map(|l| &l.rect)).expect("group is non-empty"),
        source_box,
    })
}

/// Predictions sorted by the configured key; ties keep input order.
pub fn order_boxes(predictions: &[Rect], order: BoxOrder) -> Vec<Rect> {
    let mut boxes = predictions.to_vec();
    match order {
        BoxOrder::TopLeft => boxes.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x))),
        BoxOrder::AreaAsc => boxes.sort_by(|a, b| a.area().total_cmp(&b.area())),
    }
    boxes
}

pub fn merge_layers(
    predictions: &[Rect],
    draft: &DesignDraft,
    cfg: &MergerConfig,
) -> Result<MergeResult, MergeError> {
    merge_flat(predictions, &flatten_layers(draft), cfg)
}

pub fn merge_flat(
    predictions: &[Rect],
    flat: &FlatLayerList,
    cfg: &MergerConfig,
) -> Result<MergeResult, MergeError> {
    cfg.validate()?;
    let mut working: Vec<FlatLayer> = flat.layers().to_vec();
    let mut groups = Vec::new();
    for bx in order_boxes(predictions, cfg.box_order) {
        let filtered = filter_by_intersection(&bx, &working, cfg.intersection_threshold);
        if filtered.is_empty() {
            continue;
        }
        let threshold = match cfg.distance_rule {
            DistanceRule::MeanGap => distance_threshold(&filtered)?,
            DistanceRule::Disabled => f64::INFINITY,
        };
        let group = group_by_distance(&filtered, threshold, bx)?;
        let claimed: HashSet<&str> = group.member_ids.iter().map(String::as_str).collect();
        working.retain(|l| !claimed.contains(l.id.as_str()));
        groups.push(group);
    }
    Ok(MergeResult {
        groups,
        leftover: FlatLayerList::from_layers(working),
    })
}

/// Replaces every group with one image layer covering its members, placed
/// where the group's bottom member was. Merged layers are named `merged-<n>`
/// and record the ids they replaced.
pub fn apply_merge(draft: &DesignDraft, result: &MergeResult) -> Result<DesignDraft, MergeError> {
    let flat = flatten_layers(draft);
    let mut existing: HashSet<String> = HashSet::new();
    draft.walk(|l| {
        existing.insert(l.id.clone());
    });

    let mut replacements: HashMap<String, Layer> = HashMap::new();
    let mut removed: HashSet<String> = HashSet::new();
    for (n, group) in result.groups.iter().enumerate() {
        let mut positions = Vec::with_capacity(group.member_ids.len());
        for id in &group.member_ids {
            let pos = flat
                .position(id)
                .ok_or_else(|| MergeError::StaleResult(id.clone()))?;
            positions.push(pos);
        }
        let Some(&bottom) = positions.iter().min() else {
            continue;
        };
        let label = format!("merged-{}", n + 1);
        let mut id = label.clone();
        let mut bump = 1;
        while existing.contains(&id) {
            bump += 1;
            id = format!("{label}-{bump}");
        }
        existing.insert(id.clone());

        let rects: Vec<Rect> = positions.iter().map(|&p| flat.layers()[p].rect).collect();
        let mut merged = Layer::new(
            id,
            label,
            LayerType::Image,
            enclosing(&rects).expect("group is non-empty"),
        );
        merged.merged_from = group.member_ids.clone();
        let bottom_id = flat.layers()[bottom].id.clone();
        for id in &group.member_ids {
            if *id != bottom_id {
                removed.insert(id.clone());
            }
        }
        replacements.insert(bottom_id, merged);
    }

    let mut out = draft.clone();
    out.layers = rebuild(&draft.layers, &replacements, &removed);
    Ok(out)
}

fn rebuild(layers: &[Layer], replacements: &HashMap<String, Layer>, removed: &HashSet<String>) -> Vec<Layer> {
    let mut out = Vec::with_capacity(layers.len());
    for layer in layers {
        let children = rebuild(&layer.children, replacements, removed);
        if let Some(merged) = replacements.get(&layer.id) {
            out.push(merged.clone());
            out.extend(children);
        } else if removed.contains(&layer.id) {
            out.extend(children);
        } else {
            let mut kept = layer.clone();
            kept.children = children;
            out.push(kept);
        }
    }
    out
}
