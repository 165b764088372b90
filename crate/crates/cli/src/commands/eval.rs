use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::Args;
use layermerge_core::metrics::{coco_map, mean_layers_iou, Detection, GroundTruth, MetricsReport};
use serde::Serialize;

use super::{find_predictions, load_predictions, load_tiles, predictions_on_artboard, GroundTruthFile, GroupsFile};
use crate::config::PipelineConfig;
use crate::output::{read_json, write_json, write_run_meta, Outcome};

pub const MATCHING_RULE: &str =
    "greedy one-to-one matching by descending layer-set IoU; unmatched ground-truth groups score 0; \
     mean taken over all ground-truth groups";

#[derive(Args, Clone)]
pub struct EvalArgs {
    /// Directory of `<stem>.gt.json` (and optional `<stem>.tiles.json`).
    #[arg(long)]
    pub gt: PathBuf,
    /// Directory of `<stem>.predictions.json` to score as detections.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Directory of `<stem>.groups.json` to score as layer groupings.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct MergingReport {
    mean_layers_iou: f64,
    ground_truth_groups: usize,
    drafts: usize,
    matching: &'static str,
}

#[derive(Serialize)]
struct DraftScore {
    draft: String,
    ground_truth_groups: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_layers_iou: Option<f64>,
}

#[derive(Serialize)]
struct EvalReport {
    detection: Option<MetricsReport>,
    merging: Option<MergingReport>,
    drafts: Vec<DraftScore>,
}

fn gt_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out: Vec<(String, PathBuf)> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter_map(|p| {
            let name = p.file_name()?.to_str()?.to_string();
            name.strip_suffix(".gt.json").map(|s| (s.to_string(), p.clone()))
        })
        .collect();
    out.sort();
    Ok(out)
}

pub fn run(args: &EvalArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    ensure!(
        args.predictions.is_some() || args.groups.is_some(),
        "nothing to evaluate: pass --predictions and/or --groups"
    );
    let files = gt_files(&args.gt)?;
    ensure!(!files.is_empty(), "no *.gt.json files in {}", args.gt.display());

    let mut outcome = Outcome::default();
    let mut all_gt: Vec<GroundTruth> = Vec::new();
    let mut all_dets: Vec<Detection> = Vec::new();
    let mut drafts = Vec::new();
    let (mut iou_sum, mut group_total, mut scored_drafts) = (0.0, 0usize, 0usize);

    for (stem, path) in &files {
        outcome.processed += 1;
        let result = (|| -> Result<DraftScore> {
            let gt: GroundTruthFile = read_json(path)?;
            all_gt.extend(gt.boxes.iter().map(|b| GroundTruth::new(stem.clone(), *b)));

            if let Some(dir) = &args.predictions {
                match find_predictions(dir, stem) {
                    Some(p) => {
                        let tiles = load_tiles(&args.gt.join(format!("{stem}.tiles.json")))?;
                        all_dets.extend(predictions_on_artboard(&load_predictions(&p)?, stem, tiles.as_ref())?);
                    }
                    None => log::warn!("{stem}: no predictions, counted as none"),
                }
            }

            let mut score = DraftScore {
                draft: stem.clone(),
                ground_truth_groups: gt.groups.len(),
                mean_layers_iou: None,
            };
            if let Some(dir) = &args.groups {
                let gpath = dir.join(format!("{stem}.groups.json"));
                let pred = if gpath.exists() {
                    read_json::<GroupsFile>(&gpath)?.groups
                } else {
                    log::warn!("{stem}: no groups, counted as none");
                    Vec::new()
                };
                if !gt.groups.is_empty() {
                    let m = mean_layers_iou(&pred, &gt.groups)?;
                    iou_sum += m * gt.groups.len() as f64;
                    group_total += gt.groups.len();
                    scored_drafts += 1;
                    score.mean_layers_iou = Some(m);
                }
            }
            Ok(score)
        })();
        match result {
            Ok(s) => drafts.push(s),
            Err(e) => {
                eprintln!("error: {}: {e:#}", path.display());
                outcome.failed += 1;
            }
        }
    }

    let detection = args.predictions.as_ref().map(|_| coco_map(&all_dets, &all_gt));
    let merging = (args.groups.is_some() && group_total > 0).then(|| MergingReport {
        mean_layers_iou: iou_sum / group_total as f64,
        ground_truth_groups: group_total,
        drafts: scored_drafts,
        matching: MATCHING_RULE,
    });

    if let Some(r) = &detection {
        print!("{}", r.to_table());
    }
    if let Some(m) = &merging {
        println!("mean layers IoU {:.4}", m.mean_layers_iou);
    }
    write_json(
        &args.out.join("metrics.json"),
        &EvalReport {
            detection,
            merging,
            drafts,
        },
    )?;
    let mut inputs: Vec<PathBuf> = files.into_iter().map(|(_, p)| p).collect();
    inputs.sort();
    write_run_meta(&args.out, "eval", cfg, &inputs)?;
    Ok(outcome)
}
