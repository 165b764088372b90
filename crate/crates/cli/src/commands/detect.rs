use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use layermerge_core::detector::{baseline_detect, to_tiles, write_predictions, write_predictions_jsonl};
use layermerge_core::metrics::Detection;
use layermerge_core::tiling::{build_manifest, default_tile_height};

use super::{for_each_input, inputs, load_draft, Input};
use crate::config::PipelineConfig;
use crate::output::{write_atomic, write_run_meta, Outcome};

#[derive(Args, Clone)]
pub struct DetectArgs {
    /// Draft JSON files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Largest edge-to-edge gap, in pixels, that links two layers.
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub min_group: Option<usize>,
    /// Skip layers covering more than this fraction of the artboard (1 keeps all).
    #[arg(long)]
    pub max_area_fraction: Option<f64>,
    /// Emit boxes in tile coordinates instead of artboard coordinates.
    #[arg(long)]
    pub tile_coords: bool,
    /// Write the line-delimited variant.
    #[arg(long)]
    pub jsonl: bool,
}

fn detect_one(args: &DetectArgs, cfg: &PipelineConfig, input: &Input) -> Result<()> {
    let draft = load_draft(&input.path)?;
    let mut dets: Vec<Detection> = baseline_detect(&draft, &cfg.baseline)?
        .into_iter()
        .map(|d| Detection::new(input.stem.clone(), d.bbox, d.score))
        .collect();
    if args.tile_coords {
        let mut named = draft.clone();
        named.name = Some(input.stem.clone());
        let th = cfg.tile_height.unwrap_or_else(|| default_tile_height(&draft.artboard));
        dets = to_tiles(&dets, &build_manifest(&named, th)?);
    }
    let (bytes, ext) = if args.jsonl {
        (write_predictions_jsonl(&dets)?, "jsonl")
    } else {
        (write_predictions(&dets)?, "json")
    };
    write_atomic(&args.out.join(format!("{}.predictions.{ext}", input.stem)), &bytes)
}

pub fn run(args: &DetectArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let mut effective = cfg.clone();
    if let Some(e) = args.epsilon {
        effective.baseline.epsilon = e;
    }
    if let Some(m) = args.min_group {
        effective.baseline.min_group = m;
    }
    if let Some(f) = args.max_area_fraction {
        effective.baseline.max_area_fraction = Some(f);
    }
    let cfg = &effective;
    let items = inputs(&args.inputs);
    let results = for_each_input(cfg, &items, |i| detect_one(args, cfg, i))?;
    write_run_meta(&args.out, "detect-baseline", cfg, &args.inputs)?;
    Ok(Outcome::from_results(&results))
}
