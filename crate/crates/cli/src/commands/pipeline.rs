use std::path::PathBuf;

use anyhow::{ensure, Result};
use clap::Args;

use super::parse::CorpusManifest;
use super::{augment, detect, eval, merge, parse, rasterize, synth};
use crate::config::PipelineConfig;
use crate::output::{read_json, write_run_meta, Outcome};

#[derive(Args, Clone)]
pub struct PipelineArgs {
    /// Draft JSON files (omit when using --synth).
    pub inputs: Vec<PathBuf>,
    /// Generate this many synthetic drafts as the input corpus.
    #[arg(long)]
    pub synth: Option<usize>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Skip writing augmented drafts.
    #[arg(long)]
    pub no_augment: bool,
}

/// Output layout: `synth/`, `parsed/`, `raster/`, `augment/`, `detect/`,
/// `merge/`, `eval/`, each with its own `run.json`.
pub fn run(args: &PipelineArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let mut drafts = args.inputs.clone();
    if let Some(n) = args.synth {
        drafts.extend(synth::generate(&args.out.join("synth"), n, cfg)?);
        write_run_meta(&args.out.join("synth"), "synth", cfg, &[])?;
    }
    ensure!(!drafts.is_empty(), "no input drafts: pass files or --synth N");

    let parsed = args.out.join("parsed");
    let mut outcome = parse::run(
        &parse::ParseArgs {
            inputs: drafts.clone(),
            out: parsed.clone(),
            tile_height: None,
        },
        cfg,
    )?;
    let manifest: CorpusManifest = read_json(&parsed.join("manifest.json"))?;
    let normalized = manifest.draft_paths(&parsed);
    if normalized.is_empty() {
        return Ok(outcome);
    }

    let downstream = [
        rasterize::run(
            &rasterize::RasterizeArgs {
                inputs: normalized.clone(),
                out: args.out.join("raster"),
                screenshots: None,
                tiles: true,
                tile_height: None,
            },
            cfg,
        )?,
        if args.no_augment {
            Outcome::default()
        } else {
            augment::run(
                &augment::AugmentArgs {
                    inputs: normalized.clone(),
                    out: args.out.join("augment"),
                    epochs: None,
                    deletion_prob: None,
                    mode: None,
                    select: None,
                },
                cfg,
            )?
        },
        detect::run(
            &detect::DetectArgs {
                inputs: normalized.clone(),
                out: args.out.join("detect"),
                epsilon: None,
                min_group: None,
                max_area_fraction: None,
                tile_coords: false,
                jsonl: false,
            },
            cfg,
        )?,
        merge::run(
            &merge::MergeArgs {
                inputs: normalized.clone(),
                predictions: args.out.join("detect"),
                tiles: Some(parsed.clone()),
                out: args.out.join("merge"),
                intersection_threshold: None,
                distance_rule: None,
                box_order: None,
            },
            cfg,
        )?,
        eval::run(
            &eval::EvalArgs {
                gt: parsed.clone(),
                predictions: Some(args.out.join("detect")),
                groups: Some(args.out.join("merge")),
                out: args.out.join("eval"),
            },
            cfg,
        )?,
    ];
    // a file that failed downstream counts against the run once
    let failed_downstream = downstream.iter().map(|o| o.failed).max().unwrap_or(0);
    outcome.failed = (outcome.failed + failed_downstream).min(outcome.processed);
    write_run_meta(&args.out, "pipeline", cfg, &args.inputs)?;
    Ok(outcome)
}
