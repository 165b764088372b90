//! Splitting tall artboards into detector-sized tiles.
//!
//! Artboards that already fit inside 800 px (shorter side) by 1333 px (longer
//! side) become a single tile at native scale. Larger artboards are cut into
//! full-width horizontal bands of `tile_height` pixels, and every band shares
//! one scale factor chosen so the tallest band lands inside the limits with
//! its shorter side as close to 800 px as the longer-side limit allows.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::draft::DesignDraft;
use crate::geometry::Rect;

pub const MAX_SHORT_SIDE: f64 = 800.0;
pub const MAX_LONG_SIDE: f64 = 1333.0;
/// A ground-truth box is kept in a tile when at least this fraction of its area survives clipping.
pub const MIN_VISIBLE_FRACTION: f64 = 0.3;
/// Slack for comparing scaled tile sides against the limits.
pub const SIDE_TOLERANCE: f64 = 1e-6;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Error, PartialEq)]
pub enum TileError {
    #[error("artboard has zero area ({w}x{h})")]
    DegenerateArtboard { w: f64, h: f64 },
    #[error("tile height must be positive and finite, got {0}")]
    InvalidTileHeight(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tile {
    pub index: usize,
    pub image_id: String,
    /// Crop window in artboard coordinates.
    pub region: Rect,
    /// Factor applied after cropping.
    pub scale: f64,
    /// Ground-truth boxes in tile (cropped and scaled) coordinates.
    pub ground_truth: Vec<Rect>,
}

impl Tile {
    pub fn scaled_size(&self) -> (f64, f64) {
        (self.region.w * self.scale, self.region.h * self.scale)
    }

    pub fn within_limits(&self) -> bool {
        let (w, h) = self.scaled_size();
        w.min(h) <= MAX_SHORT_SIDE + SIDE_TOLERANCE && w.max(h) <= MAX_LONG_SIDE + SIDE_TOLERANCE
    }

    pub fn to_artboard(&self, r: &Rect) -> Rect {
        r.scale(1.0 / self.scale).translate(self.region.x, self.region.y)
    }

    pub fn to_tile(&self, r: &Rect) -> Rect {
        r.translate(-self.region.x, -self.region.y).scale(self.scale)
    }
}

/// On-disk listing of the tiles cut from one draft.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileManifest {
    pub schema_version: u32,
    pub draft: String,
    pub artboard_w: f64,
    pub artboard_h: f64,
    pub tile_height: f64,
    pub tiles: Vec<Tile>,
}

impl TileManifest {
    pub fn tile(&self, image_id: &str) -> Option<&Tile> {
        self.tiles.iter().find(|t| t.image_id == image_id)
    }
}

/// Band height whose scaled long side is exactly 1333 px once the shorter
/// artboard side is scaled to 800 px.
pub fn default_tile_height(artboard: &Rect) -> f64 {
    MAX_LONG_SIDE * artboard.w.min(artboard.h) / MAX_SHORT_SIDE
}

fn fits_natively(w: f64, h: f64) -> bool {
    w.min(h) <= MAX_SHORT_SIDE && w.max(h) <= MAX_LONG_SIDE
}

fn band_scale(w: f64, band_h: f64) -> f64 {
    (MAX_SHORT_SIDE / w.min(band_h)).min(MAX_LONG_SIDE / w.max(band_h))
}

pub fn tile_artboard(draft: &DesignDraft, tile_height: f64) -> Result<Vec<Tile>, TileError> {
    let (w, h) = (draft.artboard.w, draft.artboard.h);
    if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
        return Err(TileError::DegenerateArtboard { w, h });
    }
    if !(tile_height > 0.0 && tile_height.is_finite()) {
        return Err(TileError::InvalidTileHeight(tile_height));
    }
    let stem = draft.name.as_deref().unwrap_or("draft");

    let (regions, scale) = if fits_natively(w, h) {
        (vec![Rect::new(0.0, 0.0, w, h)], 1.0)
    } else {
        // the epsilon keeps an exact multiple from spawning an empty band
        let count = ((h / tile_height) - 1e-9).ceil().max(1.0) as usize;
        let regions: Vec<Rect> = (0..count)
            .map(|k| {
                let top = k as f64 * tile_height;
                let bottom = if k + 1 == count {
                    h
                } else {
                    ((k + 1) as f64 * tile_height).min(h)
                };
                Rect::from_corners(0.0, top, w, bottom)
            })
            .collect();
        (regions, band_scale(w, tile_height.min(h)))
    };

    Ok(regions
        .into_iter()
        .enumerate()
        .map(|(index, region)| {
            let mut tile = Tile {
                index,
                image_id: format!("{stem}/tile-{index}"),
                region,
                scale,
                ground_truth: Vec::new(),
            };
            tile.ground_truth = draft
                .ground_truth
                .iter()
                .filter_map(|gt| {
                    let clipped = gt.intersection(&region)?;
                    (clipped.area() >= MIN_VISIBLE_FRACTION * gt.area()).then(|| tile.to_tile(&clipped))
                })
                .collect();
            tile
        })
        .collect())
}

pub fn build_manifest(draft: &DesignDraft, tile_height: f64) -> Result<TileManifest, TileError> {
    Ok(TileManifest {
        schema_version: MANIFEST_VERSION,
        draft: draft.name.clone().unwrap_or_else(|| "draft".into()),
        artboard_w: draft.artboard.w,
        artboard_h: draft.artboard.h,
        tile_height,
        tiles: tile_artboard(draft, tile_height)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn draft(w: f64, h: f64, gt: Vec<Rect>) -> DesignDraft {
        let mut d = DesignDraft::new(w, h, vec![]);
        d.ground_truth = gt;
        d
    }

    #[test]
    fn tall_mobile_artboard_yields_three_bands() {
        let d = draft(750.0, 3000.0, vec![]);
        let th = default_tile_height(&d.artboard);
        // 1333 * 750 / 800, worked by hand
        assert_eq!(th, 1249.6875);
        let tiles = tile_artboard(&d, th).unwrap();
        assert_eq!(tiles.len(), 3);
        let heights: Vec<f64> = tiles.iter().map(|t| t.region.h).collect();
        assert_eq!(heights, vec![1249.6875, 1249.6875, 500.625]);
        for t in &tiles {
            assert!((t.scale - 800.0 / 750.0).abs() < 1e-12);
            assert!(t.within_limits());
        }
    }

    #[test]
    fn small_artboard_is_one_native_tile() {
        let tiles = tile_artboard(&draft(400.0, 400.0, vec![]), 1000.0).unwrap();
        assert_eq!(tiles.len(), 1);
        assert_eq!(tiles[0].scale, 1.0);
        assert_eq!(tiles[0].region, Rect::new(0.0, 0.0, 400.0, 400.0));
    }

    #[test]
    fn wide_artboard_is_downscaled() {
        let tiles = tile_artboard(&draft(3000.0, 600.0, vec![]), 1000.0).unwrap();
        assert_eq!(tiles.len(), 1);
        assert!(tiles[0].scale < 1.0);
        assert!(tiles[0].within_limits());
    }

    #[test]
    fn ground_truth_lands_in_its_tile_only() {
        let gt = Rect::new(100.0, 1300.0, 50.0, 40.0);
        let d = draft(750.0, 3000.0, vec![gt]);
        let tiles = tile_artboard(&d, default_tile_height(&d.artboard)).unwrap();
        assert!(tiles[0].ground_truth.is_empty());
        assert!(tiles[2].ground_truth.is_empty());
        assert_eq!(tiles[1].ground_truth.len(), 1);
        let back = tiles[1].to_artboard(&tiles[1].ground_truth[0]);
        assert!((back.x - gt.x).abs() < 1e-9 && (back.y - gt.y).abs() < 1e-9);
        assert!((back.w - gt.w).abs() < 1e-9 && (back.h - gt.h).abs() < 1e-9);
    }

    #[test]
    fn straddling_box_kept_where_enough_survives() {
        // 100 px tall box; 20 px above the first cut, 80 px below
        let th = 1000.0;
        let gt = Rect::new(0.0, th - 20.0, 50.0, 100.0);
        let d = draft(900.0, 2500.0, vec![gt]);
        let tiles = tile_artboard(&d, th).unwrap();
        assert!(tiles[0].ground_truth.is_empty());
        assert_eq!(tiles[1].ground_truth.len(), 1);

        let even = Rect::new(0.0, th - 50.0, 50.0, 100.0);
        let tiles = tile_artboard(&draft(900.0, 2500.0, vec![even]), th).unwrap();
        assert_eq!(tiles[0].ground_truth.len(), 1);
        assert_eq!(tiles[1].ground_truth.len(), 1);
    }

    #[test]
    fn exact_multiple_has_no_empty_band() {
        let tiles = tile_artboard(&draft(900.0, 3000.0, vec![]), 1000.0).unwrap();
        assert_eq!(tiles.len(), 3);
        assert!(tiles.iter().all(|t| t.region.h == 1000.0));
    }

    #[test]
    fn errors() {
        assert_eq!(
            tile_artboard(&draft(0.0, 100.0, vec![]), 10.0),
            Err(TileError::DegenerateArtboard { w: 0.0, h: 100.0 })
        );
        assert_eq!(
            tile_artboard(&draft(100.0, 100.0, vec![]), 0.0),
            Err(TileError::InvalidTileHeight(0.0))
        );
    }

    proptest! {
        #[test]
        fn bands_partition_artboard(w in 50.0..3000.0f64, h in 50.0..12000.0f64, th in 100.0..2500.0f64) {
            let tiles = tile_artboard(&draft(w, h, vec![]), th).unwrap();
            let total: f64 = tiles.iter().map(|t| t.region.h).sum();
            prop_assert!((total - h).abs() < 1e-6);
            prop_assert_eq!(tiles[0].region.y, 0.0);
            for pair in tiles.windows(2) {
                prop_assert!((pair[0].region.bottom() - pair[1].region.y).abs() < 1e-9);
            }
            for t in &tiles {
                prop_assert!(t.within_limits());
                prop_assert!(t.region.h > 0.0);
            }
        }

        #[test]
        fn tile_mapping_round_trips(x in 0.0..700.0f64, y in 0.0..1200.0f64, bw in 1.0..50.0f64, bh in 1.0..50.0f64) {
            let d = draft(750.0, 3000.0, vec![]);
            let tiles = tile_artboard(&d, default_tile_height(&d.artboard)).unwrap();
            let r = Rect::new(x, y, bw, bh);
            for t in &tiles {
                let back = t.to_tile(&t.to_artboard(&r));
                prop_assert!((back.x - r.x).abs() < 1e-6 && (back.y - r.y).abs() < 1e-6);
                prop_assert!((back.w - r.w).abs() < 1e-6 && (back.h - r.h).abs() < 1e-6);
            }
        }
    }
}
