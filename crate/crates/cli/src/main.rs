//! `layermerge`: batch pipeline for detecting and merging fragmented layers.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::PipelineConfig;
use crate::output::Outcome;

#[derive(Parser)]
#[command(name = "layermerge", version, about = "Detect and merge fragmented layers in UI design drafts")]
struct Cli {
    /// TOML configuration file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random choice.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for corpus-level parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate drafts and write normalized drafts, ground truth and tile manifests.
    Parse(commands::parse::ParseArgs),
    /// Render screenshots, segmentation maps and fusion manifests.
    Rasterize(commands::rasterize::RasterizeArgs),
    /// Write layer-deletion augmentations of drafts with an audit log.
    Augment(commands::augment::AugmentArgs),
    /// Propose merging areas by clustering nearby layers.
    DetectBaseline(commands::detect::DetectArgs),
    /// Group layers inside predicted merging areas and merge each group.
    Merge(commands::merge::MergeArgs),
    /// Score detections (AP family) and groupings (mean layers IoU).
    Eval(commands::eval::EvalArgs),
    /// Draw ground truth, predictions and merged layers over a screenshot.
    RenderOverlay(commands::overlay::OverlayArgs),
    /// Generate seeded synthetic drafts with known components.
    Synth(commands::synth::SynthArgs),
    /// Run parse, rasterize, augment, detect-baseline, merge and eval in sequence.
    Pipeline(commands::pipeline::PipelineArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match PipelineConfig::load(cli.config.as_deref()) {
        Ok(c) => c.with_globals(cli.seed, cli.jobs),
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let default_level = cfg.log_level.clone().unwrap_or_else(|| "warn".into());
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("UILM_LOG", default_level))
        .format_timestamp(None)
        .init();

    let result = match &cli.command {
        Command::Parse(a) => commands::parse::run(a, &cfg),
        Command::Rasterize(a) => commands::rasterize::run(a, &cfg),
        Command::Augment(a) => commands::augment::run(a, &cfg),
        Command::DetectBaseline(a) => commands::detect::run(a, &cfg),
        Command::Merge(a) => commands::merge::run(a, &cfg),
        Command::Eval(a) => commands::eval::run(a, &cfg),
        Command::RenderOverlay(a) => commands::overlay::run(a, &cfg),
        Command::Synth(a) => commands::synth::run(a, &cfg),
        Command::Pipeline(a) => commands::pipeline::run(a, &cfg),
    };
    match result {
        Ok(outcome) => ExitCode::from(outcome.exit_code()),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(Outcome::INVALID)
        }
    }
}
