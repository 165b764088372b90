use std::path::Path;

use anyhow::{Context, Result};
use layermerge_core::augment::AugmentationConfig;
use layermerge_core::detector::BaselineConfig;
use layermerge_core::merge::MergerConfig;
use layermerge_core::synth::SynthConfig;
use serde::{Deserialize, Serialize};

/// Everything a run depends on besides its input files. Serialized
/// canonically into `run.json` and hashed there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub jobs: Option<usize>,
    /// Band height for tiling; derived per artboard when unset.
    pub tile_height: Option<f64>,
    pub log_level: Option<String>,
    pub merger: MergerConfig,
    pub augment: AugmentationConfig,
    pub baseline: BaselineConfig,
    pub synth: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            jobs: None,
            tile_height: None,
            log_level: None,
            merger: MergerConfig::default(),
            augment: AugmentationConfig::default(),
            baseline: BaselineConfig {
                max_area_fraction: Some(0.5),
                ..BaselineConfig::default()
            },
            synth: SynthConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn with_globals(mut self, seed: Option<u64>, jobs: Option<usize>) -> Self {
        if let Some(s) = seed {
            self.seed = s;
        }
        if jobs.is_some() {
            self.jobs = jobs;
        }
        // one seed drives everything
        self.augment.seed = self.seed;
        self
    }

    pub fn pool(&self) -> Result<rayon::ThreadPool> {
        let mut builder = rayon::ThreadPoolBuilder::new();
        if let Some(n) = self.jobs {
            anyhow::ensure!(n > 0, "--jobs must be at least 1");
            builder = builder.num_threads(n);
        }
        Ok(builder.build()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use layermerge_core::merge::DistanceRule;

    #[test]
    fn toml_overrides_defaults() {
        let cfg: PipelineConfig = toml::from_str(
            r#"
            seed = 9
            [merger]
            intersection_threshold = 0.5
            distance_rule = "disabled"
            [augment]
            deletion_prob = 0.1
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.merger.intersection_threshold, 0.5);
        assert_eq!(cfg.merger.distance_rule, DistanceRule::Disabled);
        assert_eq!(cfg.augment.deletion_prob, 0.1);
        assert_eq!(cfg.augment.large_width_ratio, 0.7);
        assert_eq!(cfg.baseline.max_area_fraction, Some(0.5));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(toml::from_str::<PipelineConfig>("sed = 1").is_err());
    }

    #[test]
    fn flag_seed_wins_and_reaches_augmentation() {
        let cfg = PipelineConfig {
            seed: 3,
            ..Default::default()
        }
        .with_globals(Some(11), None);
        assert_eq!(cfg.seed, 11);
        assert_eq!(cfg.augment.seed, 11);
    }
}
