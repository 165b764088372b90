use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::Args;
use layermerge_core::draft::serialize_draft;
use layermerge_core::merge::{apply_merge, merge_layers, BoxOrder, DistanceRule};

use super::{
    find_predictions, for_each_input, inputs, load_draft, load_predictions, load_tiles, predictions_on_artboard,
    GroupsFile, Input, ARTIFACT_VERSION,
};
use crate::config::PipelineConfig;
use crate::output::{to_json_bytes, write_atomic, write_run_meta, Outcome};

#[derive(Args, Clone)]
pub struct MergeArgs {
    /// Draft JSON files.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// A predictions file (single draft) or a directory of `<stem>.predictions.json`.
    #[arg(short, long)]
    pub predictions: PathBuf,
    /// Directory of `<stem>.tiles.json` for tile-coordinate predictions
    /// (default: next to each draft).
    #[arg(long)]
    pub tiles: Option<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
    /// Minimum fraction of a layer's area inside a box.
    #[arg(long)]
    pub intersection_threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub distance_rule: Option<RuleArg>,
    #[arg(long, value_enum)]
    pub box_order: Option<OrderArg>,
}

#[derive(clap::ValueEnum, Clone, Copy)]
pub enum RuleArg {
    MeanGap,
    Disabled,
}

#[derive(clap::ValueEnum, Clone, Copy)]
pub enum OrderArg {
    TopLeft,
    AreaAsc,
}

fn merge_one(args: &MergeArgs, cfg: &PipelineConfig, input: &Input) -> Result<()> {
    let draft = load_draft(&input.path)?;
    let pred_path = if args.predictions.is_dir() {
        match find_predictions(&args.predictions, &input.stem) {
            Some(p) => p,
            None => bail!("no predictions for {} in {}", input.stem, args.predictions.display()),
        }
    } else if args.inputs.len() == 1 {
        args.predictions.clone()
    } else {
        bail!("--predictions must be a directory when merging several drafts")
    };
    let tiles_dir = args
        .tiles
        .clone()
        .or_else(|| input.path.parent().map(PathBuf::from))
        .unwrap_or_default();
    let manifest = load_tiles(&tiles_dir.join(format!("{}.tiles.json", input.stem)))?;
    let dets = predictions_on_artboard(&load_predictions(&pred_path)?, &input.stem, manifest.as_ref())?;
    let boxes: Vec<_> = dets.iter().map(|d| d.bbox).collect();

    let result = merge_layers(&boxes, &draft, &cfg.merger)?;
    let merged = apply_merge(&draft, &result)?;
    let stem = &input.stem;
    write_atomic(&args.out.join(format!("{stem}.merged.draft.json")), &serialize_draft(&merged))?;
    let groups = GroupsFile {
        schema_version: ARTIFACT_VERSION,
        draft: stem.clone(),
        groups: result.groups,
        leftover: result.leftover.iter().map(|l| l.id.clone()).collect(),
    };
    write_atomic(&args.out.join(format!("{stem}.groups.json")), &to_json_bytes(&groups)?)
}

pub fn run(args: &MergeArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let mut effective = cfg.clone();
    if let Some(t) = args.intersection_threshold {
        effective.merger.intersection_threshold = t;
    }
    if let Some(r) = args.distance_rule {
        effective.merger.distance_rule = match r {
            RuleArg::MeanGap => DistanceRule::MeanGap,
            RuleArg::Disabled => DistanceRule::Disabled,
        };
    }
    if let Some(o) = args.box_order {
        effective.merger.box_order = match o {
            OrderArg::TopLeft => BoxOrder::TopLeft,
            OrderArg::AreaAsc => BoxOrder::AreaAsc,
        };
    }
    effective.merger.validate()?;
    let cfg = &effective;
    let items = inputs(&args.inputs);
    let results = for_each_input(cfg, &items, |i| merge_one(args, cfg, i))?;
    write_run_meta(&args.out, "merge", cfg, &args.inputs)?;
    Ok(Outcome::from_results(&results))
}
