//! Motion bitmaps and the statistics derived from them.
//!
//! The sensor reports motion as a binary QQVGA-sized grid (120 rows by 160
//! columns). Column and row projections of that grid drive both the alarm
//! logic and region proposal, and per-region moments feed the classifier.

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

pub const QQVGA_ROWS: usize = 120;
pub const QQVGA_COLS: usize = 160;

/// Binary motion grid. Row-major, each cell strictly 0 or 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionBitmap {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl MotionBitmap {
    /// All-cold bitmap at the native QQVGA geometry.
    pub fn new() -> Self {
        Self::with_dims(QQVGA_ROWS, QQVGA_COLS)
    }

    /// All-cold bitmap with explicit dimensions (small grids in tests).
    pub fn with_dims(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "bitmap dimensions must be positive");
        MotionBitmap {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.bits[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, hot: bool) {
        self.bits[r * self.cols + c] = hot;
    }

    pub fn count_hot(&self) -> u32 {
        self.bits.iter().filter(|&&b| b).count() as u32
    }

    /// True when the box lies entirely inside the grid.
    pub fn contains_box(&self, b: &BoundingBox) -> bool {
        b.x0 >= 0 && b.y0 >= 0 && (b.x1 as i64) < self.cols as i64 && (b.y1 as i64) < self.rows as i64
    }

    fn box_bounds_error(&self, b: &BoundingBox) -> Error {
        Error::BoxOutOfBounds {
            x0: b.x0,
            y0: b.y0,
            x1: b.x1,
            y1: b.y1,
            rows: self.rows,
            cols: self.cols,
        }
    }
}

impl Default for MotionBitmap {
    fn default() -> Self {
        Self::new()
    }
}

/// Column and row hot-pixel counts of a bitmap.
///
/// `x[c]` counts hot pixels in column `c`, `y[r]` in row `r`; both sum to
/// the bitmap's total hot count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProjectionPair {
    pub x: Vec<u32>,
    pub y: Vec<u32>,
}

/// Project a bitmap onto its column and row axes.
pub fn project(bm: &MotionBitmap) -> ProjectionPair {
    let mut x = vec![0u32; bm.cols()];
    let mut y = vec![0u32; bm.rows()];
    for r in 0..bm.rows() {
        for c in 0..bm.cols() {
            if bm.get(r, c) {
                x[c] += 1;
                y[r] += 1;
            }
        }
    }
    ProjectionPair { x, y }
}

/// First and second spatial statistics of the hot pixels inside a box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// Hot-pixel count within the box.
    pub m00: u32,
    /// Centroid and per-axis variance; `None` when the region is empty.
    pub stats: Option<MomentStats>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentStats {
    /// Centroid column, in bitmap coordinates.
    pub cx: f64,
    /// Centroid row.
    pub cy: f64,
    /// Population variance of hot-pixel columns.
    pub var_x: f64,
    /// Population variance of hot-pixel rows.
    pub var_y: f64,
}

/// Moments of the hot pixels of `bm` inside `bbox`.
///
/// The box must lie within the bitmap. An empty region is not an error; it
/// yields `m00 == 0` with no stats, and callers that need a centroid must
/// handle that case explicitly.
pub fn moments(bm: &MotionBitmap, bbox: &BoundingBox) -> Result<Moments> {
    if !bm.contains_box(bbox) {
        return Err(bm.box_bounds_error(bbox));
    }
    // Integer accumulators keep the sums exact; the variance below is then
    // correct to one f64 rounding of the closed form.
    let (mut n, mut sx, mut sy, mut sxx, mut syy) = (0i64, 0i64, 0i64, 0i64, 0i64);
    for r in bbox.y0 as usize..=bbox.y1 as usize {
        for c in bbox.x0 as usize..=bbox.x1 as usize {
            if bm.get(r, c) {
                n += 1;
                sx += c as i64;
                sy += r as i64;
                sxx += (c * c) as i64;
                syy += (r * r) as i64;
            }
        }
    }
    if n == 0 {
        return Ok(Moments { m00: 0, stats: None });
    }
    let nf = n as f64;
    let stats = MomentStats {
        cx: sx as f64 / nf,
        cy: sy as f64 / nf,
        var_x: (n * sxx - sx * sx) as f64 / (nf * nf),
        var_y: (n * syy - sy * sy) as f64 / (nf * nf),
    };
    Ok(Moments {
        m00: n as u32,
        stats: Some(stats),
    })
}
