use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use anyhow::Result;
use clap::Args;
use layermerge_core::augment::{augment_with_audit, select_hard_examples, DeletionMode};
use layermerge_core::draft::serialize_draft;
use serde::Serialize;

use super::parse::CorpusManifest;
use super::{for_each_input, inputs, load_draft};
use crate::config::PipelineConfig;
use crate::output::{write_atomic, write_json, write_run_meta, Outcome};

#[derive(Args, Clone)]
pub struct AugmentArgs {
    /// Draft JSON files, or a `manifest.json` written by `parse`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<u32>,
    #[arg(long)]
    pub deletion_prob: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// Augment only this fraction of the drafts holding small or elongated components.
    #[arg(long)]
    pub select: Option<f64>,
}

#[derive(clap::ValueEnum, Clone, Copy)]
pub enum ModeArg {
    Independent,
    ExactFraction,
}

#[derive(Serialize)]
struct AuditEntry {
    draft: String,
    epoch: u32,
    output: String,
    deleted: Vec<String>,
}

#[derive(Serialize)]
struct Audit {
    schema_version: u32,
    seed: u64,
    /// Stems chosen by `--select`; absent when every draft is augmented.
    #[serde(skip_serializing_if = "Option::is_none")]
    selected: Option<Vec<String>>,
    entries: Vec<AuditEntry>,
}

/// Replaces corpus manifests by the drafts they list.
pub fn expand_inputs(paths: &[PathBuf]) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for p in paths {
        let manifest = std::fs::read(p)
            .ok()
            .and_then(|b| serde_json::from_slice::<CorpusManifest>(&b).ok());
        match manifest {
            Some(m) => out.extend(m.draft_paths(p.parent().unwrap_or(Path::new(".")))),
            None => out.push(p.clone()),
        }
    }
    out
}

pub fn run(args: &AugmentArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let mut acfg = cfg.augment.clone();
    if let Some(e) = args.epochs {
        acfg.epochs = e;
    }
    if let Some(p) = args.deletion_prob {
        acfg.deletion_prob = p;
    }
    if let Some(m) = args.mode {
        acfg.mode = match m {
            ModeArg::Independent => DeletionMode::Independent,
            ModeArg::ExactFraction => DeletionMode::ExactFraction,
        };
    }
    acfg.validate()?;
    let effective = PipelineConfig {
        augment: acfg.clone(),
        ..cfg.clone()
    };
    let cfg = &effective;

    let paths = expand_inputs(&args.inputs);
    let items = inputs(&paths);
    let drafts = for_each_input(cfg, &items, |i| load_draft(&i.path))?;
    let outcome = Outcome::from_results(&drafts);

    let selected: Option<BTreeSet<usize>> = args.select.map(|fraction| {
        let corpus: Vec<(&str, &layermerge_core::DesignDraft)> = items
            .iter()
            .zip(&drafts)
            .filter_map(|(i, d)| d.as_ref().ok().map(|d| (i.stem.as_str(), d)))
            .collect();
        let index_of: Vec<usize> = drafts
            .iter()
            .enumerate()
            .filter(|(_, d)| d.is_ok())
            .map(|(k, _)| k)
            .collect();
        let pick = select_hard_examples(&corpus, fraction, cfg.seed);
        pick.small_objects
            .iter()
            .chain(&pick.large_aspect)
            .map(|&k| index_of[k])
            .collect()
    });

    let jobs: Vec<(usize, u32)> = drafts
        .iter()
        .enumerate()
        .filter(|(k, d)| d.is_ok() && selected.as_ref().is_none_or(|s| s.contains(k)))
        .flat_map(|(k, _)| (0..acfg.epochs).map(move |e| (k, e)))
        .collect();
    let written: Vec<Result<AuditEntry>> = cfg.pool()?.install(|| {
        use rayon::prelude::*;
        jobs.par_iter()
            .map(|&(k, epoch)| {
                let draft = drafts[k].as_ref().expect("filtered to loaded drafts");
                let result = augment_with_audit(draft, &acfg, epoch as u64);
                let output = format!("{}.aug-{epoch}.draft.json", items[k].stem);
                write_atomic(&args.out.join(&output), &serialize_draft(&result.draft))?;
                Ok(AuditEntry {
                    draft: items[k].stem.clone(),
                    epoch,
                    output,
                    deleted: result.deleted,
                })
            })
            .collect()
    });
    let entries = written.into_iter().collect::<Result<Vec<_>>>()?;

    let audit = Audit {
        schema_version: super::ARTIFACT_VERSION,
        seed: acfg.seed,
        selected: selected.map(|s| s.into_iter().map(|k| items[k].stem.clone()).collect()),
        entries,
    };
    write_json(&args.out.join("audit.json"), &audit)?;
    write_run_meta(&args.out, "augment", cfg, &paths)?;
    Ok(outcome)
}
