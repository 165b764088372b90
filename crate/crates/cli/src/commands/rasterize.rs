use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use layermerge_core::raster::{
    compose_spatial_fusion, external_screenshot, render_screenshot, render_segmentation_map, resample_region,
    FusionManifest, Raster,
};
use layermerge_core::tiling::{build_manifest, default_tile_height};
use layermerge_core::flatten_layers;

use super::{for_each_input, inputs, load_draft, Input};
use crate::config::PipelineConfig;
use crate::output::{to_json_bytes, write_atomic, write_run_meta, Outcome};

#[derive(Args, Clone)]
pub struct RasterizeArgs {
    /// Draft JSON files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Directory of real screenshots named `<stem>.png`, used instead of solid-fill renders.
    #[arg(long)]
    pub screenshots: Option<PathBuf>,
    /// Also write detector-sized tile crops of both images.
    #[arg(long)]
    pub tiles: bool,
    #[arg(long)]
    pub tile_height: Option<f64>,
}

fn rasterize_one(args: &RasterizeArgs, cfg: &PipelineConfig, input: &Input) -> Result<()> {
    let draft = load_draft(&input.path)?;
    let flat = flatten_layers(&draft);
    let external = args
        .screenshots
        .as_ref()
        .map(|d| d.join(format!("{}.png", input.stem)))
        .filter(|p| p.exists());
    let screenshot = match external {
        Some(p) => {
            let bytes = std::fs::read(&p).with_context(|| format!("reading {}", p.display()))?;
            external_screenshot(Raster::from_png(&bytes)?, &draft.artboard)
                .with_context(|| format!("{}", p.display()))?
        }
        None => render_screenshot(&flat, &draft.artboard)?,
    };
    let segmap = render_segmentation_map(&flat, &draft.artboard)?;
    // validates the pairing before anything is written
    compose_spatial_fusion(&screenshot, &segmap)?;

    let stem = &input.stem;
    let shot_name = format!("{stem}.screenshot.png");
    let seg_name = format!("{stem}.segmap.png");
    write_atomic(&args.out.join(&shot_name), &screenshot.to_png()?)?;
    write_atomic(&args.out.join(&seg_name), &segmap.to_png()?)?;
    let fusion = FusionManifest {
        screenshot: shot_name,
        segmap: seg_name,
    };
    write_atomic(&args.out.join(format!("{stem}.fusion.json")), &to_json_bytes(&fusion)?)?;

    if args.tiles {
        let th = args
            .tile_height
            .or(cfg.tile_height)
            .unwrap_or_else(|| default_tile_height(&draft.artboard));
        for tile in build_manifest(&draft, th)?.tiles {
            let k = tile.index;
            let shot = resample_region(&screenshot, &tile.region, tile.scale);
            let seg = resample_region(&segmap, &tile.region, tile.scale);
            write_atomic(&args.out.join(format!("{stem}.tile-{k}.screenshot.png")), &shot.to_png()?)?;
            write_atomic(&args.out.join(format!("{stem}.tile-{k}.segmap.png")), &seg.to_png()?)?;
        }
    }
    Ok(())
}

pub fn run(args: &RasterizeArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let items = inputs(&args.inputs);
    let results = for_each_input(cfg, &items, |i| rasterize_one(args, cfg, i))?;
    write_run_meta(&args.out, "rasterize", cfg, &args.inputs)?;
    Ok(Outcome::from_results(&results))
}
