pub mod augment;
pub mod detect;
pub mod eval;
pub mod merge;
pub mod overlay;
pub mod parse;
pub mod pipeline;
pub mod rasterize;
pub mod synth;

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use layermerge_core::metrics::Detection;
use layermerge_core::tiling::TileManifest;
use layermerge_core::{parse_draft, DesignDraft, MergeGroup, Rect};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::PipelineConfig;
use crate::output::{read_json, unique_stems};

pub const ARTIFACT_VERSION: u32 = 1;

/// `<stem>.gt.json`: ground-truth boxes and layer groups of one draft.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthFile {
    pub schema_version: u32,
    pub draft: String,
    pub boxes: Vec<Rect>,
    pub groups: Vec<MergeGroup>,
}

/// `<stem>.groups.json`: merge output of one draft.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupsFile {
    pub schema_version: u32,
    pub draft: String,
    pub groups: Vec<MergeGroup>,
    pub leftover: Vec<String>,
}

/// A draft loaded from disk with the stem its artifacts are named after.
pub struct Input {
    pub path: PathBuf,
    pub stem: String,
}

pub fn inputs(paths: &[PathBuf]) -> Vec<Input> {
    paths
        .iter()
        .cloned()
        .zip(unique_stems(paths))
        .map(|(path, stem)| Input { path, stem })
        .collect()
}

pub fn load_draft(path: &Path) -> Result<DesignDraft> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_draft(&bytes).with_context(|| format!("{}", path.display()))
}

/// Runs `f` over every input on the configured pool, keeping input order,
/// and reports each failure on stderr with its file.
pub fn for_each_input<T, F>(cfg: &PipelineConfig, items: &[Input], f: F) -> Result<Vec<Result<T>>>
where
    T: Send,
    F: Fn(&Input) -> Result<T> + Sync,
{
    let results: Vec<Result<T>> = cfg.pool()?.install(|| {
        items
            .par_iter()
            .map(|i| {
                log::debug!("{}: processing as {}", i.path.display(), i.stem);
                f(i)
            })
            .collect()
    });
    for (item, r) in items.iter().zip(&results) {
        if let Err(e) = r {
            eprintln!("error: {}: {e:#}", item.path.display());
        }
    }
    Ok(results)
}

/// Reads `predictions.json` or its line-delimited `.jsonl` variant.
pub fn load_predictions(path: &Path) -> Result<Vec<Detection>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let parsed = if path.extension().is_some_and(|e| e == "jsonl") {
        layermerge_core::detector::read_predictions_jsonl(&bytes)
    } else {
        layermerge_core::detector::read_predictions(&bytes)
    };
    parsed.with_context(|| format!("{}", path.display()))
}

/// Predictions for `stem` inside `dir`, preferring `.json` over `.jsonl`.
pub fn find_predictions(dir: &Path, stem: &str) -> Option<PathBuf> {
    ["json", "jsonl"]
        .iter()
        .map(|ext| dir.join(format!("{stem}.predictions.{ext}")))
        .find(|p| p.exists())
}

/// Brings detections into artboard coordinates of draft `stem`. Entries
/// naming a tile in `manifest` are mapped back; entries naming the draft
/// itself are already in artboard coordinates.
pub fn predictions_on_artboard(dets: &[Detection], stem: &str, manifest: Option<&TileManifest>) -> Result<Vec<Detection>> {
    dets.iter()
        .enumerate()
        .map(|(index, d)| {
            if let Some(tile) = manifest.and_then(|m| m.tile(&d.image_id)) {
                return Ok(Detection::new(stem, tile.to_artboard(&d.bbox), d.score));
            }
            if d.image_id == stem || manifest.is_some_and(|m| m.draft == d.image_id) {
                return Ok(Detection::new(stem, d.bbox, d.score));
            }
            if manifest.is_none() {
                log::warn!("entry {index}: image {:?} taken as artboard coordinates of {stem}", d.image_id);
                return Ok(Detection::new(stem, d.bbox, d.score));
            }
            anyhow::bail!("entry {index}: image {:?} is neither {stem} nor one of its tiles", d.image_id)
        })
        .collect()
}

pub fn load_tiles(path: &Path) -> Result<Option<TileManifest>> {
    if path.exists() {
        Ok(Some(read_json(path)?))
    } else {
        Ok(None)
    }
}
