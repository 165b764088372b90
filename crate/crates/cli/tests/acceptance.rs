//! Acceptance suite. Each criterion prints one PASS or FAIL line; the process
//! exits non-zero when any criterion fails.

use std::collections::HashSet;
use std::fs;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use layermerge_core::augment::{augment_with_audit, classify_draft, AugmentationConfig};
use layermerge_core::draft::{ground_truth_groups, serialize_draft};
use layermerge_core::geometry::adaptive::{adaptive_convolve, offset_field, Anchor, FeatureGrid};
use layermerge_core::merge::{merge_layers, DistanceRule, MergerConfig};
use layermerge_core::metrics::{
    average_precision, coco_map, mean_layers_iou, AreaRange, Detection, Evaluator, GroundTruth, RECALL_POINTS,
};
use layermerge_core::raster::{layer_color, render_segmentation_map, Raster};
use layermerge_core::synth::{synth_corpus, SynthConfig};
use layermerge_core::tiling::{default_tile_height, tile_artboard};
use layermerge_core::{flatten_layers, parse_draft, DesignDraft, Layer, LayerType, MergeGroup, Rect};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn core_fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures")
}

fn group(ids: &[&str]) -> MergeGroup {
    let r = Rect::new(0.0, 0.0, 1.0, 1.0);
    MergeGroup {
        member_ids: ids.iter().map(|s| s.to_string()).collect(),
        enclosing: r,
        source_box: r,
    }
}

fn worked_example() -> Outcome {
    let partial = mean_layers_iou(&[group(&["a", "b", "c"])], &[group(&["a", "b", "c", "d"])])
        .map_err(|e| e.to_string())?;
    ensure(partial == 0.75, || format!("3 of 4 gave {partial}"))?;
    let gt = [group(&["a", "b"]), group(&["c", "d", "e"]), group(&["f"])];
    let identity = mean_layers_iou(&gt, &gt).map_err(|e| e.to_string())?;
    ensure(identity == 1.0, || format!("identity gave {identity}"))?;
    Ok(format!("3-in-4 = {partial:.4}, identity = {identity:.4}"))
}

#[derive(Deserialize)]
struct Reference {
    ap: f64,
    ap50: f64,
    ap75: f64,
}

#[derive(Deserialize)]
struct CocoFixture {
    ground_truth: Vec<GroundTruth>,
    detections: Vec<Detection>,
    reference: Reference,
}

fn sq(x: f64, y: f64, s: f64) -> Rect {
    Rect::new(x, y, s, s)
}

fn metric_oracle() -> Outcome {
    let text = fs::read_to_string(core_fixtures().join("coco_fixture8.json")).map_err(|e| e.to_string())?;
    let f: CocoFixture = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let r = coco_map(&f.detections, &f.ground_truth);
    let mut worst: f64 = 0.0;
    for (name, got, want) in [
        ("AP", r.ap, f.reference.ap),
        ("AP50", r.ap50, f.reference.ap50),
        ("AP75", r.ap75, f.reference.ap75),
    ] {
        let got = got.ok_or_else(|| format!("{name} undefined"))?;
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-6, || format!("{name} {got} vs reference {want}"))?;
    }

    // ranked TP FP TP FP TP over 3 gt: interpolated precision is 1 up to
    // recall 1/3, 2/3 up to 2/3, 3/5 up to 1
    let gts: Vec<GroundTruth> = [0.0, 20.0, 40.0].iter().map(|&x| GroundTruth::new("img", sq(x, 0.0, 10.0))).collect();
    let dets = vec![
        Detection::new("img", sq(0.0, 0.0, 10.0), 0.9),
        Detection::new("img", sq(100.0, 100.0, 10.0), 0.8),
        Detection::new("img", sq(20.0, 0.0, 10.0), 0.7),
        Detection::new("img", sq(0.0, 0.0, 10.0), 0.6),
        Detection::new("img", sq(40.0, 0.0, 10.0), 0.5),
    ];
    let curve = Evaluator::new(&dets, &gts)
        .precision_curve(0.5, AreaRange::All)
        .ok_or("no curve")?;
    let expected: Vec<f64> = (0..RECALL_POINTS)
        .map(|i| match i {
            0..=33 => 1.0,
            34..=66 => 2.0 / 3.0,
            _ => 3.0 / 5.0,
        })
        .collect();
    ensure(curve.to_vec() == expected, || format!("PR table differs: {curve:?}"))?;
    let ap = average_precision(&dets, &gts, 0.5).ok_or("AP undefined")?;
    let table_mean = expected.iter().sum::<f64>() / RECALL_POINTS as f64;
    ensure(ap == table_mean, || format!("AP {ap} vs table mean {table_mean}"))?;
    Ok(format!(
        "fixture8 max |diff| {worst:.1e}; 5/3 PR table exact, AP {ap:.6} (382/505 = {:.6})",
        382.0 / 505.0
    ))
}

fn collect_drawable<'a>(layers: &'a [Layer], out: &mut Vec<&'a Layer>) {
    for l in layers {
        if l.layer_type != LayerType::Group {
            out.push(l);
        }
        collect_drawable(&l.children, out);
    }
}

/// Per box in reading order: every unclaimed drawable layer with at least 70%
/// of its own area inside the box, in paint order.
fn containment_oracle(draft: &DesignDraft, threshold: f64) -> Vec<Vec<String>> {
    let mut layers = Vec::new();
    collect_drawable(&draft.layers, &mut layers);
    let mut claimed = vec![false; layers.len()];
    let mut boxes = draft.ground_truth.clone();
    boxes.sort_by(|a, b| a.y.total_cmp(&b.y).then(a.x.total_cmp(&b.x)));
    let mut out = Vec::new();
    for b in boxes {
        let mut members = Vec::new();
        for (i, l) in layers.iter().enumerate() {
            if claimed[i] {
                continue;
            }
            let r = l.rect;
            let ix = (r.x + r.w).min(b.x + b.w) - r.x.max(b.x);
            let iy = (r.y + r.h).min(b.y + b.h) - r.y.max(b.y);
            let inside = if r.w * r.h > 0.0 {
                ix.max(0.0) * iy.max(0.0) / (r.w * r.h) >= threshold
            } else {
                let (cx, cy) = (r.x + r.w / 2.0, r.y + r.h / 2.0);
                b.x <= cx && cx <= b.x + b.w && b.y <= cy && cy <= b.y + b.h
            };
            if inside {
                claimed[i] = true;
                members.push(l.id.clone());
            }
        }
        if !members.is_empty() {
            out.push(members);
        }
    }
    out
}

fn merger_oracle() -> Outcome {
    let corpus = synth_corpus(0, 50, &SynthConfig::default());
    let mean_gap = MergerConfig::default();
    let disabled = MergerConfig {
        distance_rule: DistanceRule::Disabled,
        ..MergerConfig::default()
    };
    let (mut sum_gap, mut sum_disabled, mut n_groups) = (0.0, 0.0, 0usize);
    for d in &corpus {
        let name = d.name.as_deref().unwrap_or("?");
        let gt = ground_truth_groups(d);
        if gt.is_empty() {
            continue;
        }
        let weight = gt.len() as f64;
        let a = merge_layers(&d.ground_truth, d, &mean_gap).map_err(|e| format!("{name}: {e}"))?;
        sum_gap += weight * mean_layers_iou(&a.groups, &gt).map_err(|e| e.to_string())?;
        let b = merge_layers(&d.ground_truth, d, &disabled).map_err(|e| format!("{name}: {e}"))?;
        sum_disabled += weight * mean_layers_iou(&b.groups, &gt).map_err(|e| e.to_string())?;
        n_groups += gt.len();

        let got: Vec<Vec<String>> = b.groups.iter().map(|g| g.member_ids.clone()).collect();
        let want = containment_oracle(d, disabled.intersection_threshold);
        ensure(got == want, || format!("{name}: grouping differs from containment oracle"))?;
    }
    let (gap, dis) = (sum_gap / n_groups as f64, sum_disabled / n_groups as f64);
    ensure(gap >= 0.98, || format!("mean-gap mean layers IoU {gap:.4} < 0.98"))?;
    ensure(dis == 1.0, || format!("disabled-rule mean layers IoU {dis}"))?;
    Ok(format!(
        "50 drafts, {n_groups} groups: mean-gap {gap:.4}, disabled {dis:.4}, containment oracle agrees"
    ))
}

/// `ln P(X = k)` for `X ~ Binomial(n, p)`, via sums of logs.
fn ln_pmf(n: u64, k: u64, p: f64) -> f64 {
    let ln_fact = |m: u64| (2..=m).map(|i| (i as f64).ln()).sum::<f64>();
    ln_fact(n) - ln_fact(k) - ln_fact(n - k) + k as f64 * p.ln() + (n - k) as f64 * (1.0 - p).ln()
}

/// Central interval with the quantile convention "smallest k whose CDF
/// reaches q".
fn binomial_interval(n: u64, p: f64, mass: f64) -> (u64, u64) {
    let tail = (1.0 - mass) / 2.0;
    let mut cdf = 0.0;
    let (mut lo, mut hi) = (None, None);
    for k in 0..=n {
        cdf += ln_pmf(n, k, p).exp();
        if lo.is_none() && cdf >= tail {
            lo = Some(k);
        }
        if hi.is_none() && cdf >= 1.0 - tail {
            hi = Some(k);
        }
    }
    (lo.unwrap_or(0), hi.unwrap_or(n))
}

/// Frozen from `scipy.stats.binom(1000, 0.3).ppf([0.0005, 0.9995])`.
const SCIPY_INTERVAL: (u64, u64) = (253, 348);

fn augmentation_draft() -> DesignDraft {
    let mut layers = Vec::new();
    for i in 0..1000 {
        let (col, row) = ((i % 40) as f64, (i / 40) as f64);
        let r = Rect::new(col * 25.0, row * 25.0 + 200.0, 10.0, 10.0);
        layers.push(Layer::new(format!("l{i:04}"), format!("dot {i}"), LayerType::Shape, r));
    }
    for g in 0..20 {
        let x = g as f64 * 50.0;
        let kids = (0..3)
            .map(|j| {
                let id = format!("m{g:02}-{j}");
                Layer::new(id.clone(), id, LayerType::Shape, Rect::new(x + j as f64 * 12.0, 20.0, 10.0, 10.0))
            })
            .collect();
        layers.push(
            Layer::new(format!("m{g:02}"), "#merge# button", LayerType::Group, Rect::new(x, 20.0, 34.0, 10.0))
                .with_children(kids),
        );
    }
    DesignDraft::new(1000.0, 1000.0, layers)
}

fn augmentation_statistics() -> Outcome {
    let computed = binomial_interval(1000, 0.3, 0.999);
    ensure(computed == SCIPY_INTERVAL, || {
        format!("log-space interval {computed:?} disagrees with frozen {SCIPY_INTERVAL:?}")
    })?;
    let (lo, hi) = SCIPY_INTERVAL;

    let draft = augmentation_draft();
    let cfg = AugmentationConfig {
        seed: 0,
        deletion_prob: 0.3,
        ..AugmentationConfig::default()
    };
    let classes = classify_draft(&draft, &cfg);
    let deletable = classes.iter().filter(|(_, c)| c.is_deletable()).count();
    ensure(deletable == 1000, || format!("draft has {deletable} deletable layers, not 1000"))?;
    let marked: HashSet<String> = ground_truth_groups(&draft)
        .into_iter()
        .flat_map(|g| g.member_ids)
        .collect();
    ensure(marked.len() == 60, || format!("{} marked members", marked.len()))?;

    let (mut min, mut max, mut marked_deleted) = (usize::MAX, 0, 0);
    for epoch in 0..100 {
        let out = augment_with_audit(&draft, &cfg, epoch);
        let k = out.deleted.len();
        ensure((lo as usize..=hi as usize).contains(&k), || {
            format!("epoch {epoch}: {k} deletions outside [{lo}, {hi}]")
        })?;
        min = min.min(k);
        max = max.max(k);
        marked_deleted += out.deleted.iter().filter(|id| marked.contains(*id)).count();
        let again = augment_with_audit(&draft, &cfg, epoch);
        ensure(serialize_draft(&out.draft) == serialize_draft(&again.draft), || {
            format!("epoch {epoch} not reproducible")
        })?;
    }
    ensure(marked_deleted == 0, || format!("{marked_deleted} merge-marked layers deleted"))?;
    Ok(format!(
        "seed 0, deletions per epoch in [{min}, {max}] within [{lo}, {hi}]; 0 marked deletions; reruns byte-identical"
    ))
}

const GRID: usize = 16;

/// Direct sum with a tent weight over every cell.
fn direct_sum(values: &[f64], weights: &[f64], a: (f64, f64, f64, f64), k: (usize, usize)) -> f64 {
    let (kh, kw) = k;
    let mut total = 0.0;
    for i in 0..kh {
        for j in 0..kw {
            let sx = a.0 + (j as f64 - (kw / 2) as f64) * (a.2 / kw as f64);
            let sy = a.1 + (i as f64 - (kh / 2) as f64) * (a.3 / kh as f64);
            let mut v = 0.0;
            for r in 0..GRID {
                for c in 0..GRID {
                    let t = (1.0 - (c as f64 - sx).abs()).max(0.0) * (1.0 - (r as f64 - sy).abs()).max(0.0);
                    v += t * values[r * GRID + c];
                }
            }
            total += weights[i * kw + j] * v;
        }
    }
    total
}

fn adaptive_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let values: Vec<f64> = (0..GRID * GRID).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grid = FeatureGrid::new(GRID, GRID, values.clone()).map_err(|e| e.to_string())?;
        let k = ([1, 3, 5][rng.gen_range(0..3)], [1, 3, 5][rng.gen_range(0..3)]);
        let weights: Vec<f64> = (0..k.0 * k.1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = (
            rng.gen_range(0.0..GRID as f64),
            rng.gen_range(0.0..GRID as f64),
            rng.gen_range(0.5..10.0),
            rng.gen_range(0.5..10.0),
        );
        let anchor = Anchor::new(a.0, a.1, a.2, a.3).map_err(|e| e.to_string())?;
        let p = (rng.gen_range(0..GRID) as f64, rng.gen_range(0..GRID) as f64);
        let field = offset_field(&anchor, p, k, 1.0).map_err(|e| e.to_string())?;
        let got = adaptive_convolve(&grid, &weights, &field, p).map_err(|e| e.to_string())?;
        worst = worst.max((got - direct_sum(&values, &weights, a, k)).abs());
    }
    ensure(worst <= 1e-9, || format!("max abs error {worst:e}"))?;

    let mut centered = 0;
    for _ in 0..50 {
        let k = [1usize, 3, 5][rng.gen_range(0..3)];
        let d = rng.gen_range(1..=3) as f64;
        let p = (rng.gen_range(0..GRID) as f64, rng.gen_range(0..GRID) as f64);
        let anchor = Anchor::new(p.0, p.1, k as f64 * d, k as f64 * d).map_err(|e| e.to_string())?;
        let field = offset_field(&anchor, p, (k, k), d).map_err(|e| e.to_string())?;
        let r = (k / 2) as i64;
        for (t, &(ox, oy)) in field.offsets.iter().enumerate() {
            let (i, j) = ((t / k) as i64, (t % k) as i64);
            let want = ((j - r) as f64 * d, (i - r) as f64 * d);
            ensure((ox, oy) == want, || format!("k={k} d={d} tap {t}: {:?} vs {want:?}", (ox, oy)))?;
        }
        centered += 1;
    }
    Ok(format!("100 grids max abs error {worst:.1e}; {centered} centered anchors give exact dilated offsets"))
}

fn covers(start: f64, extent: f64, p: u32) -> bool {
    let a = start.round();
    let b = (start + extent).round().max(a + 1.0);
    a <= p as f64 && (p as f64) < b
}

fn topmost_oracle(draft: &DesignDraft) -> Raster {
    let mut layers = Vec::new();
    collect_drawable(&draft.layers, &mut layers);
    let (w, h) = (draft.artboard.w.round() as u32, draft.artboard.h.round() as u32);
    let mut out = Raster::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let hit = layers
                .iter()
                .enumerate()
                .rev()
                .find(|(_, l)| covers(l.rect.x, l.rect.w, x) && covers(l.rect.y, l.rect.h, y));
            if let Some((z, _)) = hit {
                out.put(x, y, layer_color(z));
            }
        }
    }
    out
}

fn random_layers(rng: &mut ChaCha8Rng, depth: u32, next: &mut usize) -> Vec<Layer> {
    (0..rng.gen_range(1..=5))
        .map(|_| {
            *next += 1;
            let id = format!("n{next}");
            let rect = Rect::new(
                rng.gen_range(-8.0..64.0),
                rng.gen_range(-8.0..64.0),
                rng.gen_range(0.0..40.0),
                rng.gen_range(0.0..40.0),
            );
            if depth < 3 && rng.gen_bool(0.3) {
                let kids = random_layers(rng, depth + 1, next);
                Layer::new(id.clone(), id, LayerType::Group, rect).with_children(kids)
            } else {
                Layer::new(id.clone(), id, LayerType::Shape, rect)
            }
        })
        .collect()
}

fn rasterizer_goldens() -> Outcome {
    let dir = core_fixtures().join("drafts");
    let goldens = fs::read_to_string(dir.join("goldens.txt")).map_err(|e| e.to_string())?;
    let mut checked = 0;
    for line in goldens.lines().filter(|l| !l.trim().is_empty()) {
        let (name, want) = line.split_once(' ').ok_or("bad goldens line")?;
        let bytes = fs::read(dir.join(format!("{name}.json"))).map_err(|e| format!("{name}: {e}"))?;
        let d = parse_draft(&bytes).map_err(|e| format!("{name}: {e}"))?;
        let got = render_segmentation_map(&flatten_layers(&d), &d.artboard).map_err(|e| e.to_string())?;
        ensure(got.digest() == want, || format!("{name}: digest {}", got.digest()))?;
        checked += 1;
    }
    ensure(checked == 10, || format!("{checked} goldens, expected 10"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x6464);
    let (mut agree, mut total) = (0usize, 0usize);
    for _ in 0..20 {
        let mut next = 0;
        let mut layers = Vec::new();
        while layers.len() < 12 {
            layers.extend(random_layers(&mut rng, 0, &mut next));
        }
        let d = DesignDraft::new(64.0, 64.0, layers);
        let got = render_segmentation_map(&flatten_layers(&d), &d.artboard).map_err(|e| e.to_string())?;
        let want = topmost_oracle(&d);
        total += 64 * 64;
        agree += got.pixels().chunks(4).zip(want.pixels().chunks(4)).filter(|(a, b)| a == b).count();
    }
    ensure(agree == total, || format!("{agree} of {total} pixels agree"))?;
    Ok(format!("{checked} golden digests match; oracle agrees on {agree}/{total} pixels"))
}

fn tiles_ok(d: &DesignDraft) -> Result<usize, String> {
    let tiles = tile_artboard(d, default_tile_height(&d.artboard)).map_err(|e| e.to_string())?;
    for t in &tiles {
        let (w, h) = (t.region.w * t.scale, t.region.h * t.scale);
        ensure(w.min(h) <= 800.0 + 1e-6 && w.max(h) <= 1333.0 + 1e-6, || {
            format!("{}x{} artboard: tile {} is {w}x{h}", d.artboard.w, d.artboard.h, t.index)
        })?;
    }
    Ok(tiles.len())
}

fn prep_rules() -> Outcome {
    let mut count = 0;
    for d in synth_corpus(0, 50, &SynthConfig::default()) {
        count += tiles_ok(&d)?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x711e);
    for _ in 0..500 {
        let (w, h) = (rng.gen_range(50.0..4000.0), rng.gen_range(50.0..12000.0));
        count += tiles_ok(&DesignDraft::new(w, h, vec![]))?;
    }

    // long side 3000 over band height 1333 * 750 / 800 = 1249.6875 -> 3 bands,
    // each scaled by 800 / 750
    let d = DesignDraft::new(750.0, 3000.0, vec![]);
    let th = default_tile_height(&d.artboard);
    ensure(th == 1249.6875, || format!("band height {th}"))?;
    let tiles = tile_artboard(&d, th).map_err(|e| e.to_string())?;
    ensure(tiles.len() == 3, || format!("{} tiles", tiles.len()))?;
    for t in &tiles {
        ensure((t.scale - 800.0 / 750.0).abs() < 1e-12, || format!("tile {} scale {}", t.index, t.scale))?;
    }
    Ok(format!("{count} tiles within 800/1333; 750x3000 gives 3 tiles at scale 800/750"))
}

fn runtime() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_layermerge"))
        .args(["pipeline", "--synth", "50", "-o"])
        .arg(dir.path().join("out"))
        .output()
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(status.status.success(), || {
        format!("pipeline exited {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr))
    })?;
    ensure(secs < 30.0, || format!("50-draft pipeline took {secs:.1}s"))?;
    Ok(format!(
        "50-draft pipeline {secs:.1}s (< 30s); whole-suite time is reported by cargo per test binary"
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("worked-example fidelity", worked_example),
        ("metric oracle equivalence", metric_oracle),
        ("merger oracle", merger_oracle),
        ("augmentation statistics", augmentation_statistics),
        ("adaptive convolution oracle", adaptive_oracle),
        ("rasterizer goldens", rasterizer_goldens),
        ("tiling rules", prep_rules),
        ("runtime", runtime),
    ];
    let start = Instant::now();
    let mut failed = 0;
    for (name, check) in criteria {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("PASS  {name}: {detail}"),
            Ok(Err(why)) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
            Err(_) => {
                failed += 1;
                println!("FAIL  {name}: panicked");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        criteria.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
