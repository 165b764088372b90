//! Detection scoring (COCO-style AP family) and grouping scoring (mean layers IoU).
//!
//! Matching and interpolation follow the reference COCO evaluator for a
//! single category: per image, detections are matched greedily by descending
//! score (at most 100 per image); ground truth outside the active area bucket
//! is ignored, as are unmatched detections outside it; precision is made
//! monotone and sampled at the 101 recall points `0.00, 0.01, .., 1.00`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::draft::MergeGroup;
use crate::geometry::{rect_iou, Rect};

pub const RECALL_POINTS: usize = 101;
pub const MAX_DETS_PER_IMAGE: usize = 100;
pub const SMALL_AREA: f64 = 32.0 * 32.0;
pub const LARGE_AREA: f64 = 96.0 * 96.0;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("mean layers IoU is undefined without ground-truth groups")]
    NoGroundTruthGroups,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    #[serde(rename = "box")]
    pub bbox: Rect,
    pub score: f64,
}

impl Detection {
    pub fn new(image_id: impl Into<String>, bbox: Rect, score: f64) -> Self {
        Self {
            image_id: image_id.into(),
            bbox,
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub image_id: String,
    #[serde(rename = "box")]
    pub bbox: Rect,
}

impl GroundTruth {
    pub fn new(image_id: impl Into<String>, bbox: Rect) -> Self {
        Self {
            image_id: image_id.into(),
            bbox,
        }
    }
}

/// Ground-truth area buckets. Bounds are half-open: `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AreaRange {
    All,
    Small,
    Medium,
    Large,
}

impl AreaRange {
    fn contains(self, area: f64) -> bool {
        match self {
            AreaRange::All => true,
            AreaRange::Small => area < SMALL_AREA,
            AreaRange::Medium => (SMALL_AREA..LARGE_AREA).contains(&area),
            AreaRange::Large => area >= LARGE_AREA,
        }
    }
}

/// IoU thresholds 0.50, 0.55, .., 0.95.
pub fn iou_thresholds() -> [f64; 10] {
    let step = 0.45 / 9.0;
    let mut t = [0.0; 10];
    for (i, v) in t.iter_mut().enumerate() {
        *v = 0.5 + i as f64 * step;
    }
    t[9] = 0.95;
    t
}

fn recall_grid() -> [f64; RECALL_POINTS] {
    let mut r = [0.0; RECALL_POINTS];
    for (i, v) in r.iter_mut().enumerate() {
        *v = i as f64 * 0.01;
    }
    r[RECALL_POINTS - 1] = 1.0;
    r
}

/// Indices of `scores` by descending score; ties keep input order.
fn rank(scores: impl Iterator<Item = f64>) -> Vec<usize> {
    let scores: Vec<f64> = scores.collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    order
}

/// Greedy matching core. `dets` and `gts` are in evaluation order and ignored
/// ground truth must come last. Returns the matched gt index per detection.
fn greedy_match(ious: &[Vec<f64>], gt_ignored: &[bool], iou_thr: f64) -> Vec<Option<usize>> {
    let n_gt = gt_ignored.len();
    let mut taken = vec![false; n_gt];
    ious.iter()
        .map(|row| {
            let mut best = iou_thr.min(1.0 - 1e-10);
            let mut m: Option<usize> = None;
            for g in 0..n_gt {
                if taken[g] {
                    continue;
                }
                if let Some(prev) = m {
                    if !gt_ignored[prev] && gt_ignored[g] {
                        break;
                    }
                }
                if row[g] < best {
                    continue;
                }
                best = row[g];
                m = Some(g);
            }
            if let Some(g) = m {
                taken[g] = true;
            }
            m
        })
        .collect()
}

/// Matches detections of one image against its ground truth at `iou_thr`.
/// Detections are visited by descending score (ties in input order); each
/// takes the still-unmatched box of highest IoU at or above the threshold.
/// The result is indexed like `dets`.
pub fn match_detections(dets: &[Detection], gts: &[Rect], iou_thr: f64) -> Vec<Option<usize>> {
    let order = rank(dets.iter().map(|d| d.score));
    let ious: Vec<Vec<f64>> = order
        .iter()
        .map(|&d| gts.iter().map(|g| rect_iou(&dets[d].bbox, g)).collect())
        .collect();
    let matched = greedy_match(&ious, &vec![false; gts.len()], iou_thr);
    let mut out = vec![None; dets.len()];
    for (k, &d) in order.iter().enumerate() {
        out[d] = matched[k];
    }
    out
}

struct ImageEval {
    scores: Vec<f64>,
    det_areas: Vec<f64>,
    gt_areas: Vec<f64>,
    /// IoU of each kept detection (score order) against each gt (input order).
    ious: Vec<Vec<f64>>,
}

/// Precomputed per-image state shared by every threshold and area bucket.
pub struct Evaluator {
    images: Vec<ImageEval>,
}

impl Evaluator {
    pub fn new(dets: &[Detection], gts: &[GroundTruth]) -> Self {
        let mut by_image: BTreeMap<&str, (Vec<&Detection>, Vec<&Rect>)> = BTreeMap::new();
        for g in gts {
            by_image.entry(&g.image_id).or_default().1.push(&g.bbox);
        }
        for d in dets {
            by_image.entry(&d.image_id).or_default().0.push(d);
        }
        let images = by_image
            .into_values()
            .map(|(ds, gs)| {
                let mut order = rank(ds.iter().map(|d| d.score));
                order.truncate(MAX_DETS_PER_IMAGE);
                let kept: Vec<&Detection> = order.iter().map(|&i| ds[i]).collect();
                ImageEval {
                    scores: kept.iter().map(|d| d.score).collect(),
                    det_areas: kept.iter().map(|d| d.bbox.area()).collect(),
                    gt_areas: gs.iter().map(|g| g.area()).collect(),
                    ious: kept
                        .iter()
                        .map(|d| gs.iter().map(|g| rect_iou(&d.bbox, g)).collect())
                        .collect(),
                }
            })
            .collect();
        Self { images }
    }

    /// Interpolated precision at the 101 recall points, or `None` when no
    /// ground truth falls in `range`.
    pub fn precision_curve(&self, iou_thr: f64, range: AreaRange) -> Option<[f64; RECALL_POINTS]> {
        // (score, is_tp, ignored) per evaluated detection, image by image
        let mut pooled: Vec<(f64, bool, bool)> = Vec::new();
        let mut positives = 0usize;
        for img in &self.images {
            let gt_ignored: Vec<bool> = img.gt_areas.iter().map(|&a| !range.contains(a)).collect();
            positives += gt_ignored.iter().filter(|&&i| !i).count();
            // ignored ground truth goes last, stable within each class
            let mut gt_order: Vec<usize> = (0..gt_ignored.len()).collect();
            gt_order.sort_by_key(|&g| gt_ignored[g]);
            let sorted_ignored: Vec<bool> = gt_order.iter().map(|&g| gt_ignored[g]).collect();
            let ious: Vec<Vec<f64>> = img
                .ious
                .iter()
                .map(|row| gt_order.iter().map(|&g| row[g]).collect())
                .collect();
            let matched = greedy_match(&ious, &sorted_ignored, iou_thr);
            for (k, m) in matched.into_iter().enumerate() {
                let ignored = match m {
                    Some(g) => sorted_ignored[g],
                    None => !range.contains(img.det_areas[k]),
                };
                pooled.push((img.scores[k], m.is_some(), ignored));
            }
        }
        if positives == 0 {
            return None;
        }

        let order = rank(pooled.iter().map(|p| p.0));
        let mut recall = Vec::with_capacity(order.len());
        let mut precision = Vec::with_capacity(order.len());
        let (mut tp, mut fp) = (0usize, 0usize);
        for &i in &order {
            let (_, hit, ignored) = pooled[i];
            if !ignored {
                if hit {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
            recall.push(tp as f64 / positives as f64);
            precision.push(if tp + fp == 0 { 0.0 } else { tp as f64 / (tp + fp) as f64 });
        }
        for i in (1..precision.len()).rev() {
            if precision[i] > precision[i - 1] {
                precision[i - 1] = precision[i];
            }
        }

        let mut curve = [0.0; RECALL_POINTS];
        for (slot, r) in curve.iter_mut().zip(recall_grid()) {
            let idx = recall.partition_point(|&x| x < r);
            if let Some(&p) = precision.get(idx) {
                *slot = p;
            }
        }
        Some(curve)
    }

    pub fn average_precision(&self, iou_thr: f64, range: AreaRange) -> Option<f64> {
        self.precision_curve(iou_thr, range)
            .map(|c| c.iter().sum::<f64>() / RECALL_POINTS as f64)
    }

    /// Mean AP over the ten IoU thresholds for one area bucket.
    pub fn mean_ap(&self, range: AreaRange) -> Option<f64> {
        let aps: Option<Vec<f64>> = iou_thresholds()
            .iter()
            .map(|&t| self.average_precision(t, range))
            .collect();
        aps.map(|v| v.iter().sum::<f64>() / v.len() as f64)
    }
}

/// 101-point interpolated AP at one IoU threshold over all images.
/// `None` when there is no ground truth; 0 when there is ground truth but no
/// detection.
pub fn average_precision(dets: &[Detection], gts: &[GroundTruth], iou_thr: f64) -> Option<f64> {
    Evaluator::new(dets, gts).average_precision(iou_thr, AreaRange::All)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdAp {
    pub iou: f64,
    pub ap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ap: Option<f64>,
    pub ap50: Option<f64>,
    pub ap75: Option<f64>,
    pub ap_small: Option<f64>,
    pub ap_medium: Option<f64>,
    pub ap_large: Option<f64>,
    pub per_threshold: Vec<ThresholdAp>,
}

impl MetricsReport {
    pub fn headline(&self) -> [(&'static str, Option<f64>); 6] {
        [
            ("AP", self.ap),
            ("AP50", self.ap50),
            ("AP75", self.ap75),
            ("AP_S", self.ap_small),
            ("AP_M", self.ap_medium),
            ("AP_L", self.ap_large),
        ]
    }

    /// Fixed-width table, one column per headline metric; empty buckets print `-`.
    pub fn to_table(&self) -> String {
        let cols = self.headline();
        let mut out = String::new();
        for (name, _) in &cols {
            let _ = write!(out, "{name:>8}");
        }
        out.push('\n');
        for (_, v) in &cols {
            match v {
                Some(v) => {
                    let _ = write!(out, "{v:>8.3}");
                }
                None => {
                    let _ = write!(out, "{:>8}", "-");
                }
            }
        }
        out.push('\n');
        out
    }
}

pub fn coco_map(dets: &[Detection], gts: &[GroundTruth]) -> MetricsReport {
    let ev = Evaluator::new(dets, gts);
    let per_threshold: Vec<ThresholdAp> = iou_thresholds()
        .iter()
        .map(|&iou| ThresholdAp {
            iou,
            ap: ev.average_precision(iou, AreaRange::All),
        })
        .collect();
    let ap = per_threshold
        .iter()
        .map(|t| t.ap)
        .collect::<Option<Vec<f64>>>()
        .map(|v| v.iter().sum::<f64>() / v.len() as f64);
    MetricsReport {
        ap,
        ap50: per_threshold[0].ap,
        ap75: per_threshold[5].ap,
        ap_small: ev.mean_ap(AreaRange::Small),
        ap_medium: ev.mean_ap(AreaRange::Medium),
        ap_large: ev.mean_ap(AreaRange::Large),
        per_threshold,
    }
}

/// Set IoU of two layer-id collections; duplicates count once.
pub fn layers_iou(a: &[String], b: &[String]) -> f64 {
    let a: BTreeSet<&str> = a.iter().map(String::as_str).collect();
    let b: BTreeSet<&str> = b.iter().map(String::as_str).collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Greedy one-to-one matching of predicted to ground-truth groups by
/// descending set IoU; matched pairs contribute their IoU, unmatched ground
/// truth contributes 0, and the sum is divided by the number of ground-truth
/// groups.
pub fn mean_layers_iou(pred: &[MergeGroup], gt: &[MergeGroup]) -> Result<f64, MetricsError> {
    if gt.is_empty() {
        return Err(MetricsError::NoGroundTruthGroups);
    }
    let key = |g: &MergeGroup| -> Vec<String> {
        let set: BTreeSet<&String> = g.member_ids.iter().collect();
        set.into_iter().cloned().collect()
    };
    let pred_keys: Vec<Vec<String>> = pred.iter().map(key).collect();
    let gt_keys: Vec<Vec<String>> = gt.iter().map(key).collect();

    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (gi, g) in gt_keys.iter().enumerate() {
        for (pi, p) in pred_keys.iter().enumerate() {
            let iou = layers_iou(g, p);
            if iou > 0.0 {
                pairs.push((iou, gi, pi));
            }
        }
    }
    // content tie-break keeps the result independent of group order
    pairs.sort_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then_with(|| gt_keys[a.1].cmp(&gt_keys[b.1]))
            .then_with(|| pred_keys[a.2].cmp(&pred_keys[b.2]))
    });

    let mut gt_used = vec![false; gt.len()];
    let mut pred_used = vec![false; pred.len()];
    let mut total = 0.0;
    for (iou, gi, pi) in pairs {
        if gt_used[gi] || pred_used[pi] {
            continue;
        }
        gt_used[gi] = true;
        pred_used[pi] = true;
        total += iou;
    }
    Ok(total / gt.len() as f64)
}
