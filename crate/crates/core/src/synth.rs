//! Seeded synthetic drafts with known components.
//!
//! Each draft has a full-bleed background, merge-marked component groups whose
//! drawable children are contiguous in paint order, and standalone layers.
//! Items are laid out in rows with a clear margin between them, so no
//! component box overlaps another item.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::draft::{DesignDraft, Layer, LayerType, Rgb};
use crate::geometry::Rect;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub width: f64,
    pub min_height: f64,
    pub max_height: f64,
    /// Chance that a laid-out item is a component rather than a standalone layer.
    pub component_prob: f64,
    /// Clear space between neighbouring items, in pixels.
    pub margin: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            width: 375.0,
            min_height: 667.0,
            max_height: 2400.0,
            component_prob: 0.5,
            margin: 12.0,
        }
    }
}

struct Builder<'a> {
    rng: ChaCha8Rng,
    cfg: &'a SynthConfig,
    components: usize,
    standalones: usize,
}

impl Builder<'_> {
    fn color(&mut self) -> Rgb {
        Rgb::new(self.rng.gen(), self.rng.gen(), self.rng.gen())
    }

    fn leaf(&mut self, id: String, rect: Rect) -> Layer {
        let kind = match self.rng.gen_range(0..3) {
            0 => LayerType::Shape,
            1 => LayerType::Text,
            _ => LayerType::Image,
        };
        let fill = self.color();
        Layer::new(id.clone(), id, kind, rect).with_fill(fill)
    }

    /// 2 to 6 drawable children inside `slot`, optionally with a plate
    /// covering the whole slot and a nested plain group.
    fn component(&mut self, slot: Rect) -> Layer {
        let k = self.components;
        self.components += 1;
        let n = self.rng.gen_range(2..=6);
        let mut kids = Vec::with_capacity(n);
        let plate = self.rng.gen_bool(0.6);
        for j in 0..n {
            let id = format!("c{k}-{j}");
            let rect = if j == 0 && plate {
                slot
            } else {
                let w = self.rng.gen_range(0.2..=1.0) * slot.w;
                let h = self.rng.gen_range(0.2..=1.0) * slot.h;
                let x = slot.x + self.rng.gen_range(0.0..=slot.w - w);
                let y = slot.y + self.rng.gen_range(0.0..=slot.h - h);
                Rect::new(x.round(), y.round(), w.round().max(1.0), h.round().max(1.0))
            };
            kids.push(self.leaf(id, rect));
        }
        if n >= 4 && self.rng.gen_bool(0.5) {
            let tail = kids.split_off(n - 2);
            kids.push(Layer::new(format!("c{k}-g"), "icon", LayerType::Group, slot).with_children(tail));
        }
        let label = ["button", "card", "icon", "tab", "badge"][self.rng.gen_range(0..5)];
        Layer::new(format!("c{k}"), format!("#merge# {label}"), LayerType::Group, slot).with_children(kids)
    }

    fn standalone(&mut self, slot: Rect) -> Layer {
        let k = self.standalones;
        self.standalones += 1;
        self.leaf(format!("s{k}"), slot)
    }
}

/// Draft number `index` of the corpus generated from `seed`.
pub fn synth_draft(seed: u64, index: u64, cfg: &SynthConfig) -> DesignDraft {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let height = rng.gen_range(cfg.min_height..=cfg.max_height).round();
    let mut b = Builder {
        rng,
        cfg,
        components: 0,
        standalones: 0,
    };
    let bg_fill = b.color();
    let mut layers = vec![Layer::new("bg", "background", LayerType::Shape, Rect::new(0.0, 0.0, cfg.width, height))
        .with_fill(bg_fill)];

    let m = b.cfg.margin;
    let mut y = m;
    loop {
        let row_h = b.rng.gen_range(24.0..=120.0f64).round();
        if y + row_h + m > height {
            break;
        }
        let mut x = m;
        loop {
            let w = b.rng.gen_range(24.0..=(cfg.width * 0.6)).round();
            if x + w + m > cfg.width {
                break;
            }
            let h = (row_h * b.rng.gen_range(0.6..=1.0)).round();
            let slot = Rect::new(x, y, w, h);
            let layer = if b.rng.gen_bool(b.cfg.component_prob) {
                b.component(slot)
            } else {
                b.standalone(slot)
            };
            layers.push(layer);
            x += w + m;
        }
        y += row_h + m;
    }

    DesignDraft::new(cfg.width, height, layers).with_name(format!("synth-{index:03}"))
}

pub fn synth_corpus(seed: u64, count: usize, cfg: &SynthConfig) -> Vec<DesignDraft> {
    (0..count as u64).map(|i| synth_draft(seed, i, cfg)).collect()
}
