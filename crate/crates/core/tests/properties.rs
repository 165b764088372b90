use std::collections::{BTreeSet, HashSet};

use layermerge_core::detector::{
    baseline_detect, proximity_clusters, read_predictions, read_predictions_jsonl, write_predictions,
    write_predictions_jsonl, BaselineConfig,
};
use layermerge_core::merge::{apply_merge, coverage, merge_layers, BoxOrder, DistanceRule, MergerConfig};
use layermerge_core::metrics::Detection;
use layermerge_core::{flatten_layers, DesignDraft, Layer, LayerType, Rect};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_forest(rng: &mut ChaCha8Rng, budget: &mut usize, depth: u32) -> Vec<Layer> {
    let mut out = Vec::new();
    while *budget > 0 && out.len() < 6 {
        *budget -= 1;
        let id = format!("L{}", *budget);
        let rect = Rect::new(rng.gen_range(0.0..100.0), rng.gen_range(0.0..100.0), 5.0, 5.0);
        if depth < 4 && rng.gen_bool(0.35) {
            let kids = random_forest(rng, budget, depth + 1);
            out.push(Layer::new(id.clone(), id, LayerType::Group, rect).with_children(kids));
        } else {
            out.push(Layer::new(id.clone(), id, LayerType::Shape, rect));
        }
        if rng.gen_bool(0.2) {
            break;
        }
    }
    out
}

#[test]
fn flatten_matches_explicit_stack_walk() {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    let mut budget = 50;
    let mut layers = Vec::new();
    while budget > 0 {
        layers.extend(random_forest(&mut rng, &mut budget, 0));
    }
    let draft = DesignDraft::new(120.0, 120.0, layers);

    let mut expected = Vec::new();
    let mut stack: Vec<&Layer> = draft.layers.iter().rev().collect();
    while let Some(l) = stack.pop() {
        if l.layer_type != LayerType::Group {
            expected.push(l.id.clone());
        }
        stack.extend(l.children.iter().rev());
    }

    let flat = flatten_layers(&draft);
    let got: Vec<String> = flat.iter().map(|l| l.id.clone()).collect();
    assert_eq!(got, expected);
    for (i, l) in flat.iter().enumerate() {
        assert_eq!(l.z_index, i);
    }
}

fn layer_strategy() -> impl Strategy<Value = Rect> {
    (0.0..180.0f64, 0.0..180.0f64, 0.0..40.0f64, 0.0..40.0f64).prop_map(|(x, y, w, h)| Rect::new(x, y, w, h))
}

fn draft_from(rects: &[Rect]) -> DesignDraft {
    let layers = rects
        .iter()
        .enumerate()
        .map(|(i, r)| Layer::new(format!("l{i}"), format!("l{i}"), LayerType::Shape, *r))
        .collect();
    DesignDraft::new(220.0, 220.0, layers)
}

fn config_strategy() -> impl Strategy<Value = MergerConfig> {
    (
        0.3..=1.0f64,
        prop::sample::select(vec![BoxOrder::TopLeft, BoxOrder::AreaAsc]),
        prop::sample::select(vec![DistanceRule::MeanGap, DistanceRule::Disabled]),
    )
        .prop_map(|(t, box_order, distance_rule)| MergerConfig {
            intersection_threshold: t,
            box_order,
            distance_rule,
        })
}

/// Connected components of the proximity relation by repeated expansion.
fn closure_oracle(rects: &[Rect], eps: f64) -> BTreeSet<BTreeSet<usize>> {
    let n = rects.len();
    let mut reach = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            let (gx, gy) = rects[i].gap(&rects[j]);
            reach[i][j] = i == j || (gx <= eps && gy <= eps);
        }
    }
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if reach[i][k] && reach[k][j] {
                    reach[i][j] = true;
                }
            }
        }
    }
    (0..n)
        .map(|i| (0..n).filter(|&j| reach[i][j]).collect())
        .collect()
}

#[test]
fn clustering_matches_transitive_closure() {
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for _ in 0..25 {
        let rects: Vec<Rect> = (0..30)
            .map(|_| {
                Rect::new(
                    rng.gen_range(0.0..300.0),
                    rng.gen_range(0.0..300.0),
                    rng.gen_range(1.0..30.0),
                    rng.gen_range(1.0..30.0),
                )
            })
            .collect();
        let eps = rng.gen_range(0.0..8.0);
        let got: BTreeSet<BTreeSet<usize>> = proximity_clusters(&rects, eps)
            .into_iter()
            .map(|c| c.into_iter().collect())
            .collect();
        assert_eq!(got, closure_oracle(&rects, eps));
    }
}

proptest! {
    #[test]
    fn groups_are_disjoint_and_layers_conserved(
        rects in prop::collection::vec(layer_strategy(), 1..40),
        boxes in prop::collection::vec(layer_strategy(), 0..8),
        cfg in config_strategy(),
    ) {
        let draft = draft_from(&rects);
        let flat = flatten_layers(&draft);
        let result = merge_layers(&boxes, &draft, &cfg).unwrap();

        let mut seen = HashSet::new();
        for g in &result.groups {
            prop_assert!(!g.member_ids.is_empty());
            let mut last_z = None;
            for id in &g.member_ids {
                prop_assert!(seen.insert(id.clone()), "{} claimed twice", id);
                let l = flat.get(id).unwrap();
                prop_assert!(coverage(&l.rect, &g.source_box) >= cfg.intersection_threshold);
                prop_assert!(last_z < Some(l.z_index));
                last_z = Some(l.z_index);
            }
        }
        for l in result.leftover.iter() {
            prop_assert!(seen.insert(l.id.clone()));
            prop_assert_eq!(flat.get(&l.id), Some(l));
        }
        prop_assert_eq!(seen.len(), flat.len());

        let merged = apply_merge(&draft, &result).unwrap();
        let removed: usize = result.groups.iter().map(|g| g.member_ids.len() - 1).sum();
        prop_assert_eq!(merged.drawable_count(), draft.drawable_count() - removed);
        prop_assert_eq!(merged.ground_truth, draft.ground_truth);
    }

    #[test]
    fn baseline_ignores_layer_order(
        rects in prop::collection::vec(layer_strategy(), 1..30),
        seed in any::<u64>(),
        eps in 0.0..10.0f64,
    ) {
        let draft = draft_from(&rects);
        let mut shuffled = draft.clone();
        shuffled.layers.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let cfg = BaselineConfig { epsilon: eps, ..Default::default() };
        prop_assert_eq!(baseline_detect(&draft, &cfg).unwrap(), baseline_detect(&shuffled, &cfg).unwrap());
    }

    #[test]
    fn predictions_round_trip(
        raw in prop::collection::vec(
            ("[a-z]{1,6}/tile-[0-9]", -1e4..1e4f64, -1e4..1e4f64, 1e-3..1e4f64, 1e-3..1e4f64, 0.0..=1.0f64),
            0..30,
        )
    ) {
        let dets: Vec<Detection> = raw
            .into_iter()
            .map(|(id, x, y, w, h, s)| Detection::new(id, Rect::new(x, y, w, h), s))
            .collect();
        prop_assert_eq!(&read_predictions(&write_predictions(&dets).unwrap()).unwrap(), &dets);
        prop_assert_eq!(&read_predictions_jsonl(&write_predictions_jsonl(&dets).unwrap()).unwrap(), &dets);
    }
}
