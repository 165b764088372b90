use std::collections::HashMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use layermerge_core::draft::{ground_truth_groups, serialize_draft};
use layermerge_core::parser::parse_draft_with_warnings;
use layermerge_core::raster::render_screenshot;
use layermerge_core::tiling::{build_manifest, default_tile_height, TileManifest};
use layermerge_core::{flatten_layers, DesignDraft};
use serde::{Deserialize, Serialize};

use super::{for_each_input, inputs, GroundTruthFile, Input, ARTIFACT_VERSION};
use crate::config::PipelineConfig;
use crate::output::{to_json_bytes, write_atomic, write_json, write_run_meta, Outcome};

#[derive(Args, Clone)]
pub struct ParseArgs {
    /// Draft JSON files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Output directory.
    #[arg(short, long)]
    pub out: PathBuf,
    /// Tile band height in artboard pixels (default: derived per artboard).
    #[arg(long)]
    pub tile_height: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntryStatus {
    Ok,
    Duplicate,
    Invalid,
}

/// One line of `manifest.json`; every input gets one, in input order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub source: String,
    pub stem: String,
    pub status: EntryStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duplicate_of: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draft: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tiles: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unknown_keys: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub schema_version: u32,
    pub entries: Vec<CorpusEntry>,
}

impl CorpusManifest {
    /// Normalized draft files of the usable entries, resolved against `dir`.
    pub fn draft_paths(&self, dir: &Path) -> Vec<PathBuf> {
        self.entries
            .iter()
            .filter(|e| e.status == EntryStatus::Ok)
            .filter_map(|e| e.draft.as_ref().map(|d| dir.join(d)))
            .collect()
    }
}

struct Parsed {
    draft: DesignDraft,
    tiles: TileManifest,
    screenshot: String,
    unknown: Vec<String>,
}

fn parse_one(input: &Input, tile_height: Option<f64>) -> Result<Parsed> {
    let bytes = std::fs::read(&input.path).with_context(|| format!("reading {}", input.path.display()))?;
    let (mut draft, unknown) = parse_draft_with_warnings(&bytes)?;
    draft.name = Some(input.stem.clone());
    let flat = flatten_layers(&draft);
    let screenshot = render_screenshot(&flat, &draft.artboard)?.digest();
    let th = tile_height.unwrap_or_else(|| default_tile_height(&draft.artboard));
    let tiles = build_manifest(&draft, th)?;
    Ok(Parsed {
        draft,
        tiles,
        screenshot,
        unknown,
    })
}

pub fn run(args: &ParseArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let items = inputs(&args.inputs);
    let tile_height = args.tile_height.or(cfg.tile_height);
    let results = for_each_input(cfg, &items, |i| parse_one(i, tile_height))?;

    let mut first_seen: HashMap<String, String> = HashMap::new();
    let mut entries = Vec::with_capacity(items.len());
    for (item, result) in items.iter().zip(&results) {
        let mut entry = CorpusEntry {
            source: item.path.display().to_string(),
            stem: item.stem.clone(),
            status: EntryStatus::Invalid,
            screenshot_sha256: None,
            duplicate_of: None,
            draft: None,
            ground_truth: None,
            tiles: None,
            unknown_keys: Vec::new(),
            error: None,
        };
        match result {
            Err(e) => entry.error = Some(format!("{e:#}")),
            Ok(p) => {
                entry.screenshot_sha256 = Some(p.screenshot.clone());
                entry.unknown_keys = p.unknown.clone();
                if let Some(original) = first_seen.get(&p.screenshot) {
                    log::info!("{}: same screenshot as {original}, skipped", item.path.display());
                    entry.status = EntryStatus::Duplicate;
                    entry.duplicate_of = Some(original.clone());
                } else {
                    first_seen.insert(p.screenshot.clone(), item.stem.clone());
                    write_artifacts(&args.out, &item.stem, p)?;
                    entry.status = EntryStatus::Ok;
                    entry.draft = Some(format!("{}.draft.json", item.stem));
                    entry.ground_truth = Some(format!("{}.gt.json", item.stem));
                    entry.tiles = Some(format!("{}.tiles.json", item.stem));
                }
            }
        }
        entries.push(entry);
    }

    write_json(
        &args.out.join("manifest.json"),
        &CorpusManifest {
            schema_version: ARTIFACT_VERSION,
            entries,
        },
    )?;
    write_run_meta(&args.out, "parse", cfg, &args.inputs)?;
    Ok(Outcome::from_results(&results))
}

fn write_artifacts(out: &Path, stem: &str, p: &Parsed) -> Result<()> {
    write_atomic(&out.join(format!("{stem}.draft.json")), &serialize_draft(&p.draft))?;
    let gt = GroundTruthFile {
        schema_version: ARTIFACT_VERSION,
        draft: stem.to_string(),
        boxes: p.draft.ground_truth.clone(),
        groups: ground_truth_groups(&p.draft),
    };
    write_atomic(&out.join(format!("{stem}.gt.json")), &to_json_bytes(&gt)?)?;
    write_atomic(&out.join(format!("{stem}.tiles.json")), &to_json_bytes(&p.tiles)?)
}
