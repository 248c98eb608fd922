//! Synthetic test inputs: scripted scenes rendered to frames, and random
//! bitmaps with known region structure.
//!
//! Scenes move solid rectangles over a flat background in whole small-grid
//! pixels. Rendering at scale 4 paints each scene pixel as a uniform 4x4
//! block, so the full-size render subsamples back to the small render
//! bit for bit and both pipeline entry points can be compared exactly.

use crate::bitmap::{MotionBitmap, QQVGA_COLS, QQVGA_ROWS};
use crate::eval::GroundTruth;
use crate::geometry::BoundingBox;
use crate::sensor::GrayFrame;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// A solid rectangle moving at constant whole-pixel velocity, visible for
/// `t_enter <= t < t_exit`. Coordinates are small-grid pixels at `t_enter`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MovingRect {
    pub x0: i32,
    pub y0: i32,
    pub w: i32,
    pub h: i32,
    pub vx: i32,
    pub vy: i32,
    pub t_enter: u32,
    pub t_exit: u32,
    pub intensity: u8,
}

impl MovingRect {
    /// Top-left corner at time `t`, or None while hidden.
    fn at(&self, t: u32) -> Option<(i32, i32)> {
        if t < self.t_enter || t >= self.t_exit {
            return None;
        }
        let dt = (t - self.t_enter) as i32;
        Some((self.x0 + self.vx * dt, self.y0 + self.vy * dt))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scene {
    pub name: String,
    pub n_frames: u32,
    pub background: u8,
    pub objects: Vec<MovingRect>,
    pub truth: GroundTruth,
}

impl Scene {
    /// Render frame `t` with each scene pixel drawn as a `scale x scale`
    /// block. Objects are clipped at the frame edge.
    pub fn render(&self, t: u32, scale: usize) -> GrayFrame {
        assert!(scale > 0);
        let rows = QQVGA_ROWS * scale;
        let cols = QQVGA_COLS * scale;
        let mut frame = GrayFrame::from_pixels(rows, cols, vec![self.background; rows * cols]);
        for obj in &self.objects {
            let Some((ox, oy)) = obj.at(t) else { continue };
            let x_lo = ox.max(0);
            let y_lo = oy.max(0);
            let x_hi = (ox + obj.w).min(QQVGA_COLS as i32);
            let y_hi = (oy + obj.h).min(QQVGA_ROWS as i32);
            for y in y_lo..y_hi {
                for x in x_lo..x_hi {
                    for dy in 0..scale {
                        for dx in 0..scale {
                            frame.set(
                                y as usize * scale + dy,
                                x as usize * scale + dx,
                                obj.intensity,
                            );
                        }
                    }
                }
            }
        }
        frame
    }

    pub fn render_qqvga(&self, t: u32) -> GrayFrame {
        self.render(t, 1)
    }

    pub fn render_vga(&self, t: u32) -> GrayFrame {
        self.render(t, 4)
    }

    pub fn frames_qqvga(&self) -> Vec<GrayFrame> {
        (0..self.n_frames).map(|t| self.render_qqvga(t)).collect()
    }

    pub fn frames_vga(&self) -> Vec<GrayFrame> {
        (0..self.n_frames).map(|t| self.render_vga(t)).collect()
    }
}

/// One car crossing left to right. Frame 0 is empty so the background
/// model settles before anything moves.
pub fn scene_single_car() -> Scene {
    Scene {
        name: "single_car".into(),
        n_frames: 46,
        background: 30,
        objects: vec![MovingRect {
            x0: 2,
            y0: 70,
            w: 26,
            h: 12,
            vx: 4,
            vy: 0,
            t_enter: 1,
            t_exit: 46,
            intensity: 200,
        }],
        truth: GroundTruth { car: 1, pedestrian: 0 },
    }
}

/// A car crossing first, then two pedestrians walking toward each other
/// in their own row bands. The car clears the lane before the walkers
/// enter and the scene ends before they meet, so column runs never merge
/// and every box stays tight.
pub fn scene_car_and_pedestrians() -> Scene {
    Scene {
        name: "car_and_pedestrians".into(),
        n_frames: 60,
        background: 30,
        objects: vec![
            MovingRect {
                x0: 2,
                y0: 80,
                w: 26,
                h: 12,
                vx: 4,
                vy: 0,
                t_enter: 1,
                t_exit: 60,
                intensity: 210,
            },
            MovingRect {
                x0: 20,
                y0: 22,
                w: 5,
                h: 16,
                vx: 2,
                vy: 0,
                t_enter: 36,
                t_exit: 60,
                intensity: 190,
            },
            MovingRect {
                x0: 135,
                y0: 48,
                w: 5,
                h: 16,
                vx: -2,
                vy: 0,
                t_enter: 36,
                t_exit: 60,
                intensity: 170,
            },
        ],
        truth: GroundTruth { car: 1, pedestrian: 2 },
    }
}

/// Six pedestrians entering in staggered waves, three per direction.
/// Opposite walkers cross mid-scene; entries are offset so no crossing
/// begins on the first frame after an alarm gap, where a coasted track
/// meeting a suddenly merged box would fall below the overlap gate.
pub fn scene_pedestrian_street() -> Scene {
    let ped = |x0: i32, y0: i32, vx: i32, t_enter: u32| MovingRect {
        x0,
        y0,
        w: 5,
        h: 16,
        vx,
        vy: 0,
        t_enter,
        t_exit: 90,
        intensity: 200,
    };
    Scene {
        name: "pedestrian_street".into(),
        n_frames: 90,
        background: 30,
        objects: vec![
            ped(10, 4, 2, 1),
            ped(140, 24, -2, 1),
            ped(20, 44, 2, 18),
            ped(130, 64, -2, 18),
            ped(15, 84, 2, 36),
            ped(145, 102, -2, 38),
        ],
        truth: GroundTruth { car: 0, pedestrian: 6 },
    }
}

pub fn all_scenes() -> Vec<Scene> {
    vec![
        scene_single_car(),
        scene_car_and_pedestrians(),
        scene_pedestrian_street(),
    ]
}

/// Pipeline settings the scripted scenes are tuned for. Slow background
/// adaptation: a vacated pixel must stay within the motion threshold of
/// the true background, or the object drags a detectable ghost behind it.
pub fn scene_config() -> crate::pipeline::PipelineConfig {
    let mut cfg = crate::pipeline::PipelineConfig::default();
    cfg.sensor.alpha = 0.01;
    cfg
}

/// Bitmap with each cell hot independently at rate `density`.
pub fn random_bitmap<R: Rng>(rng: &mut R, rows: usize, cols: usize, density: f64) -> MotionBitmap {
    let mut bm = MotionBitmap::with_dims(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            if rng.random_bool(density) {
                bm.set(r, c, true);
            }
        }
    }
    bm
}

/// Greedily carve up to `max_bands` disjoint bands of `total` cells, each
/// `min_len..=max_len` long with at least one empty cell between bands.
fn carve_bands<R: Rng>(
    rng: &mut R,
    total: usize,
    max_bands: usize,
    min_len: usize,
    max_len: usize,
) -> Vec<(usize, usize)> {
    let mut bands = Vec::new();
    let mut pos = 0usize;
    for i in 0..max_bands {
        let gap = if i == 0 { rng.random_range(0..=2) } else { rng.random_range(1..=3) };
        let start = pos + gap;
        if start + min_len > total {
            break;
        }
        let len = rng.random_range(min_len..=max_len.min(total - start));
        bands.push((start, start + len - 1));
        pos = start + len;
    }
    bands
}

/// Solid rectangles pairwise separated in both rows and columns, so the
/// structure is unambiguous for any box-extraction method. Returns the
/// bitmap and the true boxes in raster order.
pub fn random_separable_bitmap<R: Rng>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    max_rects: usize,
) -> (MotionBitmap, Vec<BoundingBox>) {
    loop {
        let k = rng.random_range(1..=max_rects);
        let row_bands = carve_bands(rng, rows, k, 2, 6);
        let col_bands = carve_bands(rng, cols, k, 2, 6);
        let n = row_bands.len().min(col_bands.len());
        if n == 0 {
            continue;
        }
        // Pair row band i with a random column band, one to one. The
        // boxes stay separated on both axes no matter the pairing.
        let mut cols_order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            cols_order.swap(i, rng.random_range(0..=i));
        }
        let mut bm = MotionBitmap::with_dims(rows, cols);
        let mut boxes = Vec::with_capacity(n);
        for i in 0..n {
            let (r0, r1) = row_bands[i];
            let (c0, c1) = col_bands[cols_order[i]];
            for r in r0..=r1 {
                for c in c0..=c1 {
                    bm.set(r, c, true);
                }
            }
            boxes.push(BoundingBox::new(c0 as i32, r0 as i32, c1 as i32, r1 as i32));
        }
        return (bm, boxes);
    }
}

/// Two solid rectangles that overlap in rows but not in columns, offset
/// so neither row range contains the other. Their row runs merge into
/// one, which is exactly the case where box proposals overshoot.
pub fn random_diagonal_overlap_bitmap<R: Rng>(
    rng: &mut R,
    rows: usize,
    cols: usize,
) -> (MotionBitmap, [BoundingBox; 2]) {
    debug_assert!(rows >= 8 && cols >= 8);
    loop {
        let ah = rng.random_range(3..=rows / 2);
        let ay0 = rng.random_range(0..rows - ah - 1);
        // Slide B down by 1..ah-1 rows: overlap >= 1 and strict offset.
        let shift = rng.random_range(1..ah);
        let by0 = ay0 + shift;
        let bh = rng.random_range(ah - shift + 1..=rows - by0);
        let aw = rng.random_range(2..=cols / 2 - 1);
        let ax0 = rng.random_range(0..cols / 2 - aw);
        let bw = rng.random_range(2..=cols / 2 - 1);
        let bx0 = rng.random_range(cols / 2 + 1..=cols - bw);
        let a = BoundingBox::new(
            ax0 as i32,
            ay0 as i32,
            (ax0 + aw - 1) as i32,
            (ay0 + ah - 1) as i32,
        );
        let b = BoundingBox::new(
            bx0 as i32,
            by0 as i32,
            (bx0 + bw - 1) as i32,
            (by0 + bh - 1) as i32,
        );
        if b.y1 <= a.y1 {
            continue;
        }
        let mut bm = MotionBitmap::with_dims(rows, cols);
        for bx in [a, b] {
            for r in bx.y0..=bx.y1 {
                for c in bx.x0..=bx.x1 {
                    bm.set(r as usize, c as usize, true);
                }
            }
        }
        return (bm, [a, b]);
    }
}
