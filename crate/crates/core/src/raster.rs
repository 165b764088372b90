//! Deterministic solid-fill rendering of flattened drafts.
//!
//! Layers paint bottom to top as axis-aligned rectangles snapped to the pixel
//! grid (edges rounded half away from zero, at least one pixel per axis so no
//! layer vanishes) and clipped to the artboard. Uncovered pixels stay opaque
//! black.

use std::io::Cursor;

use image::{ImageFormat, RgbaImage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::draft::{Rgb, DEFAULT_FILL};
use crate::geometry::Rect;
use crate::parser::FlatLayerList;

const GOLDEN_RATIO_CONJUGATE: f64 = 0.618033988749895;
const PALETTE_SATURATION: f64 = 0.75;
const PALETTE_VALUE: f64 = 0.95;

#[derive(Debug, Error)]
pub enum RasterError {
    #[error("artboard {w}x{h} rounds to an empty raster")]
    EmptyArtboard { w: f64, h: f64 },
    #[error("dimension mismatch: expected {expected:?}, got {got:?}")]
    DimensionMismatch {
        expected: (u32, u32),
        got: (u32, u32),
    },
    #[error("image codec: {0}")]
    Codec(#[from] image::ImageError),
}

/// Row-major RGBA8 pixel grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    width: u32,
    height: u32,
    pixels: Vec<u8>,
}

impl Raster {
    /// Opaque black raster.
    pub fn new(width: u32, height: u32) -> Self {
        let mut pixels = vec![0u8; width as usize * height as usize * 4];
        for px in pixels.chunks_exact_mut(4) {
            px[3] = 255;
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        let mut r = Self::new(width, height);
        r.fill_span(PixelSpan {
            x0: 0,
            y0: 0,
            x1: width,
            y1: height,
        }, color);
        r
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> [u8; 4] {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2], self.pixels[i + 3]]
    }

    pub fn put(&mut self, x: u32, y: u32, color: Rgb) {
        let i = (y as usize * self.width as usize + x as usize) * 4;
        self.pixels[i..i + 4].copy_from_slice(&[color.r, color.g, color.b, 255]);
    }

    pub fn fill_span(&mut self, span: PixelSpan, color: Rgb) {
        let rgba = [color.r, color.g, color.b, 255];
        let stride = self.width as usize * 4;
        for y in span.y0..span.y1 {
            let row = y as usize * stride;
            let slice = &mut self.pixels[row + span.x0 as usize * 4..row + span.x1 as usize * 4];
            for px in slice.chunks_exact_mut(4) {
                px.copy_from_slice(&rgba);
            }
        }
    }

    /// Lowercase hex SHA-256 of the raw pixel buffer, prefixed by the dimensions.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.width.to_le_bytes());
        h.update(self.height.to_le_bytes());
        h.update(&self.pixels);
        hex::encode(h.finalize())
    }

    pub fn to_png(&self) -> Result<Vec<u8>, RasterError> {
        let img = RgbaImage::from_raw(self.width, self.height, self.pixels.clone())
            .expect("pixel buffer matches dimensions");
        let mut out = Cursor::new(Vec::new());
        img.write_to(&mut out, ImageFormat::Png)?;
        Ok(out.into_inner())
    }

    pub fn from_png(bytes: &[u8]) -> Result<Self, RasterError> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgba8();
        let (width, height) = img.dimensions();
        Ok(Self {
            width,
            height,
            pixels: img.into_raw(),
        })
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PixelSpan {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl PixelSpan {
    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }
}

fn snap_axis(start: f64, extent: f64, limit: u32) -> Option<(u32, u32)> {
    let a = start.round();
    let mut b = (start + extent).round();
    if b <= a {
        b = a + 1.0;
    }
    let lo = a.max(0.0);
    let hi = b.min(limit as f64);
    (hi > lo).then_some((lo as u32, hi as u32))
}

/// Pixels a rect paints on a `width x height` raster, `None` when it lies
/// entirely outside.
pub fn pixel_span(rect: &Rect, width: u32, height: u32) -> Option<PixelSpan> {
    if !rect.is_finite() {
        return None;
    }
    let (x0, x1) = snap_axis(rect.x, rect.w, width)?;
    let (y0, y1) = snap_axis(rect.y, rect.h, height)?;
    Some(PixelSpan { x0, y0, x1, y1 })
}

/// Raster dimensions of an artboard.
pub fn artboard_dims(artboard: &Rect) -> Result<(u32, u32), RasterError> {
    let (w, h) = (artboard.w.round(), artboard.h.round());
    if !(w >= 1.0 && h >= 1.0 && w.is_finite() && h.is_finite()) {
        return Err(RasterError::EmptyArtboard {
            w: artboard.w,
            h: artboard.h,
        });
    }
    Ok((w as u32, h as u32))
}

/// Instance color for paint position `z`: golden-ratio hue rotation at fixed
/// saturation and value, truncated to 8 bits per channel.
///
/// Consecutive positions always differ; the first repeated color is at z = 621.
pub fn layer_color(z: usize) -> Rgb {
    let hue = (z as f64 * GOLDEN_RATIO_CONJUGATE).fract();
    let (r, g, b) = hsv_to_rgb(hue, PALETTE_SATURATION, PALETTE_VALUE);
    let q = |c: f64| (c * 255.0).floor().clamp(0.0, 255.0) as u8;
    Rgb::new(q(r), q(g), q(b))
}

fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let sector = (h * 6.0).floor();
    let f = h * 6.0 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector as u32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

fn paint(
    flat: &FlatLayerList,
    artboard: &Rect,
    color_of: impl Fn(&crate::parser::FlatLayer) -> Rgb,
) -> Result<Raster, RasterError> {
    let (w, h) = artboard_dims(artboard)?;
    let mut raster = Raster::new(w, h);
    for layer in flat {
        if let Some(span) = pixel_span(&layer.rect, w, h) {
            raster.fill_span(span, color_of(layer));
        }
    }
    Ok(raster)
}

/// Paints every layer in its instance color; each pixel ends up with the
/// color of the topmost layer covering it.
pub fn render_segmentation_map(flat: &FlatLayerList, artboard: &Rect) -> Result<Raster, RasterError> {
    paint(flat, artboard, |l| layer_color(l.z_index))
}

/// Solid-fill stand-in for a real screenshot, using each layer's declared fill.
pub fn render_screenshot(flat: &FlatLayerList, artboard: &Rect) -> Result<Raster, RasterError> {
    paint(flat, artboard, |l| l.fill.unwrap_or(DEFAULT_FILL))
}

/// Accepts an externally captured screenshot if it matches the artboard size.
pub fn external_screenshot(raster: Raster, artboard: &Rect) -> Result<Raster, RasterError> {
    let expected = artboard_dims(artboard)?;
    if raster.dims() != expected {
        return Err(RasterError::DimensionMismatch {
            expected,
            got: raster.dims(),
        });
    }
    Ok(raster)
}

/// Screenshot RGB stacked on segmentation-map RGB, six interleaved channels per pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FusionImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

pub const FUSION_CHANNELS: usize = 6;

impl FusionImage {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    /// One channel plane in row-major order; 0..3 screenshot, 3..6 segmentation map.
    pub fn plane(&self, channel: usize) -> Vec<u8> {
        assert!(channel < FUSION_CHANNELS, "fusion image has 6 channels");
        self.data
            .iter()
            .skip(channel)
            .step_by(FUSION_CHANNELS)
            .copied()
            .collect()
    }

    fn split(&self, offset: usize) -> Raster {
        let mut r = Raster::new(self.width, self.height);
        for (dst, src) in r
            .pixels
            .chunks_exact_mut(4)
            .zip(self.data.chunks_exact(FUSION_CHANNELS))
        {
            dst[..3].copy_from_slice(&src[offset..offset + 3]);
        }
        r
    }

    pub fn screenshot(&self) -> Raster {
        self.split(0)
    }

    pub fn segmentation_map(&self) -> Raster {
        self.split(3)
    }
}

pub fn compose_spatial_fusion(screenshot: &Raster, segmap: &Raster) -> Result<FusionImage, RasterError> {
    if screenshot.dims() != segmap.dims() {
        return Err(RasterError::DimensionMismatch {
            expected: screenshot.dims(),
            got: segmap.dims(),
        });
    }
    let data = screenshot
        .pixels
        .chunks_exact(4)
        .zip(segmap.pixels.chunks_exact(4))
        .flat_map(|(a, b)| [a[0], a[1], a[2], b[0], b[1], b[2]])
        .collect();
    Ok(FusionImage {
        width: screenshot.width,
        height: screenshot.height,
        data,
    })
}

/// Sidecar describing a fusion image persisted as two PNGs.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusionManifest {
    pub screenshot: String,
    pub segmap: String,
}

/// Draws a rectangle outline of `thickness` pixels along the inside of the
/// rect's pixel span.
pub fn stroke_rect(raster: &mut Raster, rect: &Rect, color: Rgb, thickness: u32) {
    let Some(span) = pixel_span(rect, raster.width, raster.height) else {
        return;
    };
    for y in span.y0..span.y1 {
        for x in span.x0..span.x1 {
            let edge = x - span.x0 < thickness
                || span.x1 - 1 - x < thickness
                || y - span.y0 < thickness
                || span.y1 - 1 - y < thickness;
            if edge {
                raster.put(x, y, color);
            }
        }
    }
}

/// Crops `region` (artboard pixels) and resamples it by `scale` with
/// nearest-neighbour lookup, the way a tile is handed to a detector.
pub fn resample_region(src: &Raster, region: &Rect, scale: f64) -> Raster {
    let out_w = ((region.w * scale).round() as u32).max(1);
    let out_h = ((region.h * scale).round() as u32).max(1);
    let mut out = Raster::new(out_w, out_h);
    let max_x = src.width.saturating_sub(1) as f64;
    let max_y = src.height.saturating_sub(1) as f64;
    for v in 0..out_h {
        let sy = (region.y + (v as f64 + 0.5) / scale).floor().clamp(0.0, max_y) as u32;
        for u in 0..out_w {
            let sx = (region.x + (u as f64 + 0.5) / scale).floor().clamp(0.0, max_x) as u32;
            let [r, g, b, _] = src.get(sx, sy);
            out.put(u, v, Rgb::new(r, g, b));
        }
    }
    out
}
