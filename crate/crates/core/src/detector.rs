//! Prediction interchange for external detectors, plus a proximity-clustering
//! baseline that needs no model.
//!
//! `predictions.json` holds boxes in tile coordinates:
//!
//! ```json
//! {"schema_version": 1,
//!  "entries": [{"image_id": "home/tile-0", "box": {"x": 0, "y": 0, "w": 10, "h": 10}, "score": 0.9}]}
//! ```
//!
//! The line-delimited variant carries one entry object per line and no header.

use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::draft::DesignDraft;
use crate::geometry::{enclosing, Rect};
use crate::metrics::Detection;
use crate::parser::flatten_layers;
use crate::tiling::TileManifest;

pub const PREDICTIONS_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PredictionError {
    #[error("malformed prediction JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("prediction schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("unsupported predictions schema_version {0}")]
    Version(u32),
    #[error("entry {index}: {reason}")]
    Entry { index: usize, reason: String },
    #[error("entry {index}: image {image_id:?} is not in the tile manifest")]
    UnknownImage { index: usize, image_id: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionFile {
    pub schema_version: u32,
    pub entries: Vec<Detection>,
}

/// Checks the entry rules: finite score in `[0, 1]`, finite box of positive area.
pub fn check_detection(d: &Detection) -> Result<(), String> {
    if !(0.0..=1.0).contains(&d.score) {
        return Err(format!("score {} outside [0, 1]", d.score));
    }
    let b = &d.bbox;
    if !b.is_finite() {
        return Err("box has non-finite coordinates".into());
    }
    if !(b.w > 0.0 && b.h > 0.0) {
        return Err(format!("box {}x{} has no positive area", b.w, b.h));
    }
    Ok(())
}

fn check_all(dets: &[Detection]) -> Result<(), PredictionError> {
    for (index, d) in dets.iter().enumerate() {
        check_detection(d).map_err(|reason| PredictionError::Entry { index, reason })?;
    }
    Ok(())
}

fn schema_error(e: serde_path_to_error::Error<serde_json::Error>) -> PredictionError {
    PredictionError::Schema {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    }
}

pub fn read_predictions(bytes: &[u8]) -> Result<Vec<Detection>, PredictionError> {
    let value: serde_json::Value = serde_json::from_slice(bytes)?;
    let file: PredictionFile = serde_path_to_error::deserialize(value).map_err(schema_error)?;
    if file.schema_version != PREDICTIONS_VERSION {
        return Err(PredictionError::Version(file.schema_version));
    }
    check_all(&file.entries)?;
    Ok(file.entries)
}

pub fn write_predictions(dets: &[Detection]) -> Result<Vec<u8>, PredictionError> {
    check_all(dets)?;
    let file = PredictionFile {
        schema_version: PREDICTIONS_VERSION,
        entries: dets.to_vec(),
    };
    let mut out = serde_json::to_vec_pretty(&file)?;
    out.push(b'\n');
    Ok(out)
}

/// Reads the line-delimited variant. Blank lines are skipped; entry indices
/// in errors count entries, not lines.
pub fn read_predictions_jsonl(bytes: &[u8]) -> Result<Vec<Detection>, PredictionError> {
    let text = String::from_utf8_lossy(bytes);
    let mut out = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let index = out.len();
        let value: serde_json::Value = serde_json::from_str(line)?;
        let d: Detection = serde_path_to_error::deserialize(value).map_err(|e| PredictionError::Schema {
            path: format!("[{index}].{}", e.path()),
            message: e.into_inner().to_string(),
        })?;
        check_detection(&d).map_err(|reason| PredictionError::Entry { index, reason })?;
        out.push(d);
    }
    Ok(out)
}

pub fn write_predictions_jsonl(dets: &[Detection]) -> Result<Vec<u8>, PredictionError> {
    check_all(dets)?;
    let mut out = Vec::new();
    for d in dets {
        serde_json::to_writer(&mut out, d)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Maps tile-space detections into artboard space via the tile manifest.
/// Mapped detections take the draft name as their image id.
pub fn to_artboard(dets: &[Detection], manifest: &TileManifest) -> Result<Vec<Detection>, PredictionError> {
    dets.iter()
        .enumerate()
        .map(|(index, d)| {
            let tile = manifest
                .tile(&d.image_id)
                .ok_or_else(|| PredictionError::UnknownImage {
                    index,
                    image_id: d.image_id.clone(),
                })?;
            Ok(Detection::new(manifest.draft.clone(), tile.to_artboard(&d.bbox), d.score))
        })
        .collect()
}

/// Maps artboard-space detections onto every tile they touch, clipped to the tile.
pub fn to_tiles(dets: &[Detection], manifest: &TileManifest) -> Vec<Detection> {
    let mut out = Vec::new();
    for d in dets {
        for tile in &manifest.tiles {
            if let Some(clipped) = d.bbox.intersection(&tile.region) {
                if clipped.area() > 0.0 {
                    out.push(Detection::new(tile.image_id.clone(), tile.to_tile(&clipped), d.score));
                }
            }
        }
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("proximity must be a non-negative finite distance, got {0}")]
    Epsilon(f64),
    #[error("min_group must be at least 2, got {0}")]
    MinGroup(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Largest edge-to-edge gap, in artboard pixels, that still links two layers.
    pub epsilon: f64,
    pub min_group: usize,
    /// Layers covering more than this fraction of the artboard are left out of
    /// clustering, so a full-bleed background does not swallow every cluster.
    pub max_area_fraction: Option<f64>,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            epsilon: 4.0,
            min_group: 2,
            max_area_fraction: None,
        }
    }
}

/// Connected components of the "within `epsilon`" relation, as sorted index
/// lists ordered by their first member.
pub fn proximity_clusters(rects: &[Rect], epsilon: f64) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::<usize>::new(rects.len());
    for i in 0..rects.len() {
        for j in (i + 1)..rects.len() {
            let (gx, gy) = rects[i].gap(&rects[j]);
            if gx <= epsilon && gy <= epsilon {
                uf.union(i, j);
            }
        }
    }
    let labels = uf.into_labeling();
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut slot: std::collections::HashMap<usize, usize> = std::collections::HashMap::new();
    for (i, root) in labels.into_iter().enumerate() {
        let k = *slot.entry(root).or_insert_with(|| {
            clusters.push(Vec::new());
            clusters.len() - 1
        });
        clusters[k].push(i);
    }
    clusters
}

/// Emits one detection per proximity cluster of at least `min_group` drawable
/// layers: the cluster's enclosing box, scored `min(1, members / 8)`, sorted
/// top-left first. Coordinates are artboard pixels.
pub fn baseline_detect(draft: &DesignDraft, cfg: &BaselineConfig) -> Result<Vec<Detection>, BaselineError> {
    if !(cfg.epsilon >= 0.0 && cfg.epsilon.is_finite()) {
        return Err(BaselineError::Epsilon(cfg.epsilon));
    }
    if cfg.min_group < 2 {
        return Err(BaselineError::MinGroup(cfg.min_group));
    }
    let artboard_area = draft.artboard.area();
    let rects: Vec<Rect> = flatten_layers(draft)
        .iter()
        .map(|l| l.rect)
        .filter(|r| match cfg.max_area_fraction {
            Some(f) => r.area() <= f * artboard_area,
            None => true,
        })
        .collect();
    let image_id = draft.name.clone().unwrap_or_else(|| "draft".into());
    let mut dets: Vec<Detection> = proximity_clusters(&rects, cfg.epsilon)
        .into_iter()
        .filter(|c| c.len() >= cfg.min_group)
        .map(|c| {
            let bbox = enclosing(c.iter().map(|&i| &rects[i])).expect("cluster is non-empty");
            Detection::new(image_id.clone(), bbox, (c.len() as f64 / 8.0).min(1.0))
        })
        .filter(|d| d.bbox.w > 0.0 && d.bbox.h > 0.0)
        .collect();
    dets.sort_by(|a, b| {
        let (p, q) = (&a.bbox, &b.bbox);
        p.y.total_cmp(&q.y)
            .then(p.x.total_cmp(&q.x))
            .then(p.w.total_cmp(&q.w))
            .then(p.h.total_cmp(&q.h))
            .then(a.score.total_cmp(&b.score))
    });
    Ok(dets)
}
