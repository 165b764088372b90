//! Axis-aligned box algebra shared by every stage of the pipeline, plus the
//! anchor-conditioned sampling math in [`adaptive`].

pub mod adaptive;

use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle in pixel space, `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl Rect {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    /// Builds a rect from its corner coordinates; inverted corners give zero extent.
    pub fn from_corners(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self {
            x: x0,
            y: y0,
            w: (x1 - x0).max(0.0),
            h: (y1 - y0).max(0.0),
        }
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite()
    }

    pub fn has_negative_extent(&self) -> bool {
        self.w < 0.0 || self.h < 0.0
    }

    /// Overlap of two rects, `None` when they do not share positive area.
    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        if x1 > x0 && y1 > y0 {
            Some(Rect::from_corners(x0, y0, x1, y1))
        } else {
            None
        }
    }

    /// Tight bounding box of both rects.
    pub fn union(&self, other: &Rect) -> Rect {
        Rect::from_corners(
            self.x.min(other.x),
            self.y.min(other.y),
            self.right().max(other.right()),
            self.bottom().max(other.bottom()),
        )
    }

    /// Closed containment of another rect.
    pub fn contains(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    pub fn contains_point(&self, px: f64, py: f64) -> bool {
        px >= self.x && px <= self.right() && py >= self.y && py <= self.bottom()
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Rect {
        Rect::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    pub fn scale(&self, factor: f64) -> Rect {
        Rect::new(
            self.x * factor,
            self.y * factor,
            self.w * factor,
            self.h * factor,
        )
    }

    /// Edge-to-edge gaps along each axis; zero when the projections overlap.
    pub fn gap(&self, other: &Rect) -> (f64, f64) {
        let gx = (other.x - self.right()).max(self.x - other.right()).max(0.0);
        let gy = (other.y - self.bottom()).max(self.y - other.bottom()).max(0.0);
        (gx, gy)
    }
}

/// Tight union of a sequence of rects, `None` for an empty sequence.
pub fn enclosing<'a, I>(rects: I) -> Option<Rect>
where
    I: IntoIterator<Item = &'a Rect>,
{
    // folding corners rather than rects keeps the result independent of order
    let (x0, y0, x1, y1) = rects.into_iter().fold(
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY),
        |(x0, y0, x1, y1), r| (x0.min(r.x), y0.min(r.y), x1.max(r.right()), y1.max(r.bottom())),
    );
    (x0 <= x1 && y0 <= y1).then(|| Rect::from_corners(x0, y0, x1, y1))
}

pub fn rect_intersection_area(a: &Rect, b: &Rect) -> f64 {
    let ow = a.right().min(b.right()) - a.x.max(b.x);
    let oh = a.bottom().min(b.bottom()) - a.y.max(b.y);
    ow.max(0.0) * oh.max(0.0)
}

/// Intersection over union; two zero-area rects score 0.
pub fn rect_iou(a: &Rect, b: &Rect) -> f64 {
    let inter = rect_intersection_area(a, b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        inter / union
    }
}
