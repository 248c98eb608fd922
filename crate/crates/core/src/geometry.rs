//! Axis-aligned boxes on the integer pixel grid.
//!
//! Coordinates are inclusive on both ends, so a box covering a single pixel
//! has `x0 == x1`, `y0 == y1` and area 1. Coordinates are signed so that
//! predicted boxes may extend past the frame edge; anything attached to a
//! bitmap is validated against the bitmap bounds at the point of use.

use serde::ser::SerializeTuple;
use serde::{Deserialize, Serialize};

/// Inclusive pixel-aligned bounding box. `x` indexes columns, `y` rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    pub x0: i32,
    pub y0: i32,
    pub x1: i32,
    pub y1: i32,
}

impl BoundingBox {
    /// Panics if the corners are not ordered (`x0 <= x1 && y0 <= y1`).
    pub fn new(x0: i32, y0: i32, x1: i32, y1: i32) -> Self {
        assert!(x0 <= x1 && y0 <= y1, "degenerate box ({x0},{y0})-({x1},{y1})");
        BoundingBox { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> i64 {
        (self.x1 - self.x0) as i64 + 1
    }

    pub fn height(&self) -> i64 {
        (self.y1 - self.y0) as i64 + 1
    }

    /// Pixel count, always >= 1.
    pub fn area(&self) -> i64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x0 + self.x1) as f64 / 2.0,
            (self.y0 + self.y1) as f64 / 2.0,
        )
    }

    pub fn contains(&self, x: i32, y: i32) -> bool {
        x >= self.x0 && x <= self.x1 && y >= self.y0 && y <= self.y1
    }
}

// Boxes serialize as a compact [x0, y0, x1, y1] tuple in logs and reports.
impl Serialize for BoundingBox {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(4)?;
        t.serialize_element(&self.x0)?;
        t.serialize_element(&self.y0)?;
        t.serialize_element(&self.x1)?;
        t.serialize_element(&self.y1)?;
        t.end()
    }
}

impl<'de> Deserialize<'de> for BoundingBox {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let [x0, y0, x1, y1] = <[i32; 4]>::deserialize(d)?;
        if x0 > x1 || y0 > y1 {
            return Err(serde::de::Error::custom("box corners out of order"));
        }
        Ok(BoundingBox { x0, y0, x1, y1 })
    }
}

/// Intersection-over-union of two boxes. Returns 0 for disjoint boxes,
/// 1 for identical ones; always within [0, 1].
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = a.x1.min(b.x1) as i64 - a.x0.max(b.x0) as i64 + 1;
    let ih = a.y1.min(b.y1) as i64 - a.y0.max(b.y0) as i64 + 1;
    if iw <= 0 || ih <= 0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}
