use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use layermerge_core::raster::{external_screenshot, render_screenshot, stroke_rect, Raster};
use layermerge_core::{flatten_layers, Rect, Rgb};

use super::{load_draft, load_predictions, load_tiles, predictions_on_artboard, GroupsFile};
use crate::config::PipelineConfig;
use crate::output::{read_json, stem_of, write_atomic, write_run_meta, Outcome};

pub const GT_COLOR: Rgb = Rgb::new(255, 0, 0);
pub const PREDICTION_COLOR: Rgb = Rgb::new(0, 255, 0);
pub const MERGED_COLOR: Rgb = Rgb::new(255, 0, 0);
pub const BOX_STROKE: u32 = 2;
pub const MERGED_STROKE: u32 = 1;

#[derive(Args, Clone)]
pub struct OverlayArgs {
    pub draft: PathBuf,
    /// Detected merging areas, drawn green.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Tile manifest for tile-coordinate predictions.
    #[arg(long)]
    pub tiles: Option<PathBuf>,
    /// Merge output; member layers are outlined thin red.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Real screenshot PNG to draw on instead of the solid-fill render.
    #[arg(long)]
    pub screenshot: Option<PathBuf>,
    /// Leave out the ground-truth boxes.
    #[arg(long)]
    pub no_gt: bool,
    #[arg(short, long)]
    pub out: PathBuf,
}

/// Draws, bottom to top: merged member layers, ground truth, predictions.
pub fn compose(
    base: Raster,
    members: &[Rect],
    ground_truth: &[Rect],
    predictions: &[Rect],
) -> Raster {
    let mut canvas = base;
    for r in members {
        stroke_rect(&mut canvas, r, MERGED_COLOR, MERGED_STROKE);
    }
    for r in ground_truth {
        stroke_rect(&mut canvas, r, GT_COLOR, BOX_STROKE);
    }
    for r in predictions {
        stroke_rect(&mut canvas, r, PREDICTION_COLOR, BOX_STROKE);
    }
    canvas
}

pub fn run(args: &OverlayArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let draft = load_draft(&args.draft)?;
    let stem = stem_of(&args.draft);
    let flat = flatten_layers(&draft);
    let base = match &args.screenshot {
        Some(p) => {
            let bytes = std::fs::read(p).with_context(|| format!("reading {}", p.display()))?;
            external_screenshot(Raster::from_png(&bytes)?, &draft.artboard).with_context(|| format!("{}", p.display()))?
        }
        None => render_screenshot(&flat, &draft.artboard)?,
    };

    let predictions: Vec<Rect> = match &args.predictions {
        Some(p) => {
            let tiles = match &args.tiles {
                Some(t) => load_tiles(t)?,
                None => None,
            };
            predictions_on_artboard(&load_predictions(p)?, &stem, tiles.as_ref())?
                .into_iter()
                .map(|d| d.bbox)
                .collect()
        }
        None => Vec::new(),
    };
    let members: Vec<Rect> = match &args.groups {
        Some(g) => {
            let groups: GroupsFile = read_json(g)?;
            groups
                .groups
                .iter()
                .flat_map(|g| g.member_ids.iter())
                .filter_map(|id| flat.get(id).map(|l| l.rect))
                .collect()
        }
        None => Vec::new(),
    };
    let gt: &[Rect] = if args.no_gt { &[] } else { &draft.ground_truth };

    let canvas = compose(base, &members, gt, &predictions);
    write_atomic(&args.out.join(format!("{stem}.overlay.png")), &canvas.to_png()?)?;
    let mut inputs = vec![args.draft.clone()];
    inputs.extend(args.predictions.iter().chain(&args.groups).chain(&args.screenshot).cloned());
    write_run_meta(&args.out, "render-overlay", cfg, &inputs)?;
    Ok(Outcome {
        processed: 1,
        failed: 0,
    })
}
