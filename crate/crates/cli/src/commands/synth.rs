use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use layermerge_core::draft::serialize_draft;
use layermerge_core::synth::synth_draft;
use rayon::prelude::*;

use crate::config::PipelineConfig;
use crate::output::{write_atomic, write_run_meta, Outcome};

#[derive(Args, Clone)]
pub struct SynthArgs {
    #[arg(short, long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
}

/// Writes `synth-000.json`, `synth-001.json`, .. and returns their paths.
pub fn generate(out: &std::path::Path, count: usize, cfg: &PipelineConfig) -> Result<Vec<PathBuf>> {
    let paths: Vec<PathBuf> = (0..count).map(|i| out.join(format!("synth-{i:03}.json"))).collect();
    cfg.pool()?.install(|| {
        paths.par_iter().enumerate().try_for_each(|(i, p)| {
            let draft = synth_draft(cfg.seed, i as u64, &cfg.synth);
            write_atomic(p, &serialize_draft(&draft))
        })
    })?;
    Ok(paths)
}

pub fn run(args: &SynthArgs, cfg: &PipelineConfig) -> Result<Outcome> {
    let paths = generate(&args.out, args.count, cfg)?;
    write_run_meta(&args.out, "synth", cfg, &[])?;
    Ok(Outcome {
        processed: paths.len(),
        failed: 0,
    })
}
