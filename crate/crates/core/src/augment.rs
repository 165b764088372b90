//! Epoch-wise random deletion of layers that do not belong to a component.
//!
//! Each drawable layer outside every merge-marked subtree is classified by its
//! size relative to the artboard. Large layers (wide or covering much of the
//! screen) and small layers (narrow or covering little of it) are deletable;
//! each is dropped with probability `deletion_prob`. The draw for a layer is a
//! keyed hash of `(seed, epoch, layer id)`, so the outcome does not depend on
//! traversal order or thread scheduling.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::draft::{DesignDraft, Layer};
use crate::geometry::Rect;

/// Ground-truth boxes below this area (32 x 32 px) mark a small-object draft.
pub const SMALL_OBJECT_AREA: f64 = 32.0 * 32.0;
/// Ground-truth boxes whose long/short side ratio exceeds this mark a large-aspect draft.
pub const LARGE_ASPECT_RATIO: f64 = 3.0;

#[derive(Debug, Error, PartialEq)]
pub enum AugmentError {
    #[error("{name} must lie in (0, 1), got {value}")]
    RatioOutOfRange { name: &'static str, value: f64 },
    #[error("deletion probability must lie in [0, 1], got {0}")]
    ProbabilityOutOfRange(f64),
    #[error("epochs must be positive")]
    NoEpochs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeletionMode {
    /// Every deletable layer is dropped independently with the deletion probability.
    #[default]
    Independent,
    /// Exactly `round(p * n)` of the `n` deletable layers are dropped.
    ExactFraction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentationConfig {
    pub large_width_ratio: f64,
    pub large_area_ratio: f64,
    pub small_width_ratio: f64,
    pub small_area_ratio: f64,
    pub deletion_prob: f64,
    pub seed: u64,
    pub epochs: u32,
    pub mode: DeletionMode,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            large_width_ratio: 0.7,
            large_area_ratio: 0.3,
            small_width_ratio: 0.2,
            small_area_ratio: 0.2,
            deletion_prob: 0.3,
            seed: 0,
            epochs: 1,
            mode: DeletionMode::Independent,
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<(), AugmentError> {
        for (name, value) in [
            ("large_width_ratio", self.large_width_ratio),
            ("large_area_ratio", self.large_area_ratio),
            ("small_width_ratio", self.small_width_ratio),
            ("small_area_ratio", self.small_area_ratio),
        ] {
            if !(value > 0.0 && value < 1.0) {
                return Err(AugmentError::RatioOutOfRange { name, value });
            }
        }
        if !(0.0..=1.0).contains(&self.deletion_prob) {
            return Err(AugmentError::ProbabilityOutOfRange(self.deletion_prob));
        }
        if self.epochs == 0 {
            return Err(AugmentError::NoEpochs);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayerClass {
    LargeDeletable,
    SmallDeletable,
    Protected,
}

impl LayerClass {
    pub fn is_deletable(self) -> bool {
        self != LayerClass::Protected
    }
}

fn classify_rect(name: &str, rect: &Rect, artboard: &Rect, cfg: &AugmentationConfig) -> LayerClass {
    if crate::draft::is_merge_marked(name) {
        return LayerClass::Protected;
    }
    let (width, area) = (rect.w, rect.area());
    let (screen_w, screen_area) = (artboard.w, artboard.area());
    if width > screen_w * cfg.large_width_ratio || area > screen_area * cfg.large_area_ratio {
        LayerClass::LargeDeletable
    } else if width < screen_w * cfg.small_width_ratio || area < screen_area * cfg.small_area_ratio {
        LayerClass::SmallDeletable
    } else {
        LayerClass::Protected
    }
}

/// Size class of a single layer, judged on its own name and geometry.
pub fn classify_layer(layer: &Layer, artboard: &Rect, cfg: &AugmentationConfig) -> LayerClass {
    classify_rect(&layer.name, &layer.rect, artboard, cfg)
}

/// Uniform draw in `[0, 1)` keyed by `(seed, epoch, key)`.
pub fn keyed_uniform(seed: u64, epoch: u64, key: &str) -> f64 {
    let mut h = Sha256::new();
    h.update(b"augment\0");
    h.update(seed.to_le_bytes());
    h.update(epoch.to_le_bytes());
    h.update(key.as_bytes());
    let digest = h.finalize();
    let bits = u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"));
    (bits >> 11) as f64 / (1u64 << 53) as f64
}

/// Classes of every drawable layer in paint order. Layers inside a
/// merge-marked subtree inherit its protection.
pub fn classify_draft(draft: &DesignDraft, cfg: &AugmentationConfig) -> Vec<(String, LayerClass)> {
    fn visit(
        layers: &[Layer],
        protected: bool,
        artboard: &Rect,
        cfg: &AugmentationConfig,
        out: &mut Vec<(String, LayerClass)>,
    ) {
        for layer in layers {
            let protected = protected || layer.is_merge_marked();
            if layer.is_drawable() {
                let class = if protected {
                    LayerClass::Protected
                } else {
                    classify_layer(layer, artboard, cfg)
                };
                out.push((layer.id.clone(), class));
            }
            visit(&layer.children, protected, artboard, cfg, out);
        }
    }
    let mut out = Vec::new();
    visit(&draft.layers, false, &draft.artboard, cfg, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct AugmentOutcome {
    pub draft: DesignDraft,
    /// Removed layer ids in paint order.
    pub deleted: Vec<String>,
}

pub fn augment_draft(draft: &DesignDraft, cfg: &AugmentationConfig, epoch: u64) -> DesignDraft {
    augment_with_audit(draft, cfg, epoch).draft
}

pub fn augment_with_audit(draft: &DesignDraft, cfg: &AugmentationConfig, epoch: u64) -> AugmentOutcome {
    let candidates: Vec<String> = classify_draft(draft, cfg)
        .into_iter()
        .filter(|(_, c)| c.is_deletable())
        .map(|(id, _)| id)
        .collect();

    let deleted: Vec<String> = match cfg.mode {
        DeletionMode::Independent => candidates
            .into_iter()
            .filter(|id| keyed_uniform(cfg.seed, epoch, id) < cfg.deletion_prob)
            .collect(),
        DeletionMode::ExactFraction => {
            let k = (cfg.deletion_prob * candidates.len() as f64).round() as usize;
            let mut keyed: Vec<(f64, usize)> = candidates
                .iter()
                .enumerate()
                .map(|(i, id)| (keyed_uniform(cfg.seed, epoch, id), i))
                .collect();
            keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut chosen: Vec<usize> = keyed.into_iter().take(k).map(|(_, i)| i).collect();
            chosen.sort_unstable();
            chosen.into_iter().map(|i| candidates[i].clone()).collect()
        }
    };

    let doomed: std::collections::HashSet<&str> = deleted.iter().map(String::as_str).collect();
    let mut out = draft.clone();
    out.layers = remove_layers(&draft.layers, &doomed);
    AugmentOutcome { draft: out, deleted }
}

/// Drops the named layers; children of a dropped layer take its place.
fn remove_layers(layers: &[Layer], doomed: &std::collections::HashSet<&str>) -> Vec<Layer> {
    let mut out = Vec::with_capacity(layers.len());
    for layer in layers {
        let children = remove_layers(&layer.children, doomed);
        if doomed.contains(layer.id.as_str()) {
            out.extend(children);
        } else {
            let mut kept = layer.clone();
            kept.children = children;
            out.push(kept);
        }
    }
    out
}

/// Drafts picked for hard-example augmentation, as indices into the corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HardExampleSelection {
    pub small_objects: Vec<usize>,
    pub large_aspect: Vec<usize>,
}

pub fn has_small_object(draft: &DesignDraft) -> bool {
    draft.ground_truth.iter().any(|b| b.area() < SMALL_OBJECT_AREA)
}

pub fn has_large_aspect_object(draft: &DesignDraft) -> bool {
    draft.ground_truth.iter().any(|b| {
        let (long, short) = (b.w.max(b.h), b.w.min(b.h));
        short > 0.0 && long / short > LARGE_ASPECT_RATIO
    })
}

/// Picks `round(fraction * pool)` drafts from each qualifying pool, keyed by
/// `(seed, draft name)` so the choice is stable under corpus reordering.
pub fn select_hard_examples(corpus: &[(&str, &DesignDraft)], fraction: f64, seed: u64) -> HardExampleSelection {
    let pick = |tag: u64, qualifies: fn(&DesignDraft) -> bool| -> Vec<usize> {
        let mut pool: Vec<(f64, usize)> = corpus
            .iter()
            .enumerate()
            .filter(|(_, (_, d))| qualifies(d))
            .map(|(i, (name, _))| (keyed_uniform(seed, tag, name), i))
            .collect();
        let k = (fraction.clamp(0.0, 1.0) * pool.len() as f64).round() as usize;
        pool.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut chosen: Vec<usize> = pool.into_iter().take(k).map(|(_, i)| i).collect();
        chosen.sort_unstable();
        chosen
    };
    HardExampleSelection {
        small_objects: pick(u64::MAX, has_small_object),
        large_aspect: pick(u64::MAX - 1, has_large_aspect_object),
    }
}
