//! Anchor-conditioned sampling offsets and the adaptive convolution sum.
//!
//! Every kernel tap samples the feature map at `p + O`, where `O` is the sum
//! of a center offset (anchor center minus output location) and a shape tap
//! that spreads the kernel uniformly over the anchor extent. With the anchor
//! centered on `p` and sized `k * d` for a `k x k` kernel, the taps collapse
//! to an ordinary dilated convolution with dilation `d`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AdaptiveError {
    #[error("kernel dimensions must be odd and at least 1, got {kh}x{kw}")]
    InvalidKernel { kh: usize, kw: usize },
    #[error("anchor extent must be positive, got {w}x{h}")]
    InvalidAnchor { w: f64, h: f64 },
    #[error("expected {expected} kernel weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("feature grid {height}x{width} needs {expected} values, got {got}")]
    GridShape {
        height: usize,
        width: usize,
        expected: usize,
        got: usize,
    },
    #[error("feature grid contains a non-finite value at index {0}")]
    NonFinite(usize),
}

/// An anchor projected onto the feature map, in feature-map units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl Anchor {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self, AdaptiveError> {
        if !(w > 0.0 && h > 0.0) {
            return Err(AdaptiveError::InvalidAnchor { w, h });
        }
        Ok(Self { cx, cy, w, h })
    }
}

/// Per-tap sampling displacements, row-major over the kernel (`kh` rows of `kw`).
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetField {
    pub kh: usize,
    pub kw: usize,
    pub center_offset: (f64, f64),
    pub offsets: Vec<(f64, f64)>,
    pub dilation_base: f64,
}

impl OffsetField {
    /// Offsets relative to the regular grid of an ordinary convolution with
    /// dilation `dilation_base`. All zeros when the anchor matches that grid.
    pub fn residual_offsets(&self) -> Vec<(f64, f64)> {
        let (ry, rx) = kernel_radius(self.kh, self.kw);
        self.offsets
            .iter()
            .enumerate()
            .map(|(i, &(dx, dy))| {
                let gx = (i % self.kw) as f64 - rx;
                let gy = (i / self.kw) as f64 - ry;
                (dx - gx * self.dilation_base, dy - gy * self.dilation_base)
            })
            .collect()
    }

    pub fn taps(&self) -> usize {
        self.kh * self.kw
    }
}

/// Row-major grid of feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Result<Self, AdaptiveError> {
        let expected = height * width;
        if values.len() != expected {
            return Err(AdaptiveError::GridShape {
                height,
                width,
                expected,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(AdaptiveError::NonFinite(i));
        }
        Ok(Self {
            height,
            width,
            values,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            values: vec![0.0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value at integer cell `(col, row)`, zero outside the grid.
    pub fn at(&self, col: i64, row: i64) -> f64 {
        if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 {
            return 0.0;
        }
        self.values[row as usize * self.width + col as usize]
    }

    /// Bilinear sample at fractional `(x, y)` with zero padding.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (c, r) = (x0 as i64, y0 as i64);
        let top = self.at(c, r) * (1.0 - fx) + self.at(c + 1, r) * fx;
        let bottom = self.at(c, r + 1) * (1.0 - fx) + self.at(c + 1, r + 1) * fx;
        top * (1.0 - fy) + bottom * fy
    }
}

fn kernel_radius(kh: usize, kw: usize) -> (f64, f64) {
    (((kh - 1) / 2) as f64, ((kw - 1) / 2) as f64)
}

/// Displacement from output location `p` to the anchor center.
pub fn center_offset(anchor: &Anchor, p: (f64, f64)) -> (f64, f64) {
    (anchor.cx - p.0, anchor.cy - p.1)
}

/// Builds the sampling offsets for a `kh x kw` kernel conditioned on `anchor`.
///
/// Shape taps are spaced `(anchor.w / kw, anchor.h / kh)` and centered on zero;
/// each offset is the center offset plus its shape tap.
pub fn offset_field(
    anchor: &Anchor,
    p: (f64, f64),
    kernel: (usize, usize),
    dilation_base: f64,
) -> Result<OffsetField, AdaptiveError> {
    let (kh, kw) = kernel;
    if kh == 0 || kw == 0 || kh % 2 == 0 || kw % 2 == 0 {
        return Err(AdaptiveError::InvalidKernel { kh, kw });
    }
    let ctr = center_offset(anchor, p);
    let sx = anchor.w / kw as f64;
    let sy = anchor.h / kh as f64;
    let (ry, rx) = kernel_radius(kh, kw);
    let mut offsets = Vec::with_capacity(kh * kw);
    for i in 0..kh {
        for j in 0..kw {
            let tx = (j as f64 - rx) * sx;
            let ty = (i as f64 - ry) * sy;
            offsets.push((ctr.0 + tx, ctr.1 + ty));
        }
    }
    Ok(OffsetField {
        kh,
        kw,
        center_offset: ctr,
        offsets,
        dilation_base,
    })
}

/// `y[p] = sum over taps of w[tap] * x[p + O_tap]`, sampling `x` bilinearly.
pub fn adaptive_convolve(
    x: &FeatureGrid,
    weights: &[f64],
    field: &OffsetField,
    p: (f64, f64),
) -> Result<f64, AdaptiveError> {
    if weights.len() != field.taps() || field.offsets.len() != field.taps() {
        return Err(AdaptiveError::WeightCount {
            expected: field.taps(),
            got: weights.len(),
        });
    }
    Ok(weights
        .iter()
        .zip(&field.offsets)
        .map(|(w, (dx, dy))| w * x.sample(p.0 + dx, p.1 + dy))
        .sum())
}
