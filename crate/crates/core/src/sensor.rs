//! Sensor simulator: background subtraction, erosion, alarm logic, and the
//! two-mode burst state machine.
//!
//! The simulated device watches a scene at QQVGA resolution. While idle it
//! only maintains a background model and checks the projections of the
//! thresholded difference image for an alarm. Once an alarm fires it
//! switches to imaging mode and delivers a fixed-length burst of frames,
//! each carrying the motion bitmap hidden in the least significant bits of
//! the full-resolution image.

use crate::bitmap::{project, MotionBitmap, ProjectionPair, QQVGA_COLS, QQVGA_ROWS};
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

pub const VGA_ROWS: usize = 480;
pub const VGA_COLS: usize = 640;

/// 8-bit grayscale frame, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayFrame {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
}

impl GrayFrame {
    pub fn new(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "frame dimensions must be positive");
        GrayFrame {
            rows,
            cols,
            pixels: vec![0; rows * cols],
        }
    }

    pub fn from_pixels(rows: usize, cols: usize, pixels: Vec<u8>) -> Self {
        assert_eq!(pixels.len(), rows * cols, "pixel buffer size mismatch");
        GrayFrame { rows, cols, pixels }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        self.pixels[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: u8) {
        self.pixels[r * self.cols + c] = v;
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn is_vga(&self) -> bool {
        self.rows == VGA_ROWS && self.cols == VGA_COLS
    }

    pub fn is_qqvga(&self) -> bool {
        self.rows == QQVGA_ROWS && self.cols == QQVGA_COLS
    }
}

/// Tuning knobs of the simulated sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    /// Background update rate, in (0, 1].
    pub alpha: f64,
    /// Absolute difference threshold for a pixel to count as motion.
    pub theta: f64,
    /// Minimum hot 8-neighbours for a hot pixel to survive erosion, 0..=8.
    pub erosion_k: u8,
    /// Minimum contiguous positive run in the column projection to alarm.
    pub min_run_x: usize,
    /// Minimum contiguous positive run in the row projection to alarm.
    pub min_run_y: usize,
    /// Frames delivered per burst after an alarm.
    pub burst_len: u32,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            alpha: 0.05,
            theta: 15.0,
            erosion_k: 2,
            min_run_x: 3,
            min_run_y: 3,
            burst_len: 10,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.theta.is_nan() || self.theta < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "theta must be non-negative, got {}",
                self.theta
            )));
        }
        if self.erosion_k > 8 {
            return Err(Error::InvalidConfig(format!(
                "erosion_k must be at most 8, got {}",
                self.erosion_k
            )));
        }
        if self.min_run_x == 0 || self.min_run_y == 0 {
            return Err(Error::InvalidConfig(
                "alarm run lengths must be at least 1".into(),
            ));
        }
        if self.burst_len == 0 {
            return Err(Error::InvalidConfig("burst_len must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorMode {
    /// Idle: watch projections, deliver nothing.
    MotionDetection,
    /// Burst in progress: deliver every frame until the burst runs out.
    Imaging,
}

/// Outcome of feeding one frame to the sensor.
#[derive(Debug, Clone, PartialEq)]
pub enum SensorEvent {
    /// Nothing to report; the sensor stays silent.
    NoEvent,
    /// Motion crossed the alarm constraints; the burst starts next frame.
    AlarmRaised,
    /// One burst frame, with its motion bitmap.
    FrameDelivered {
        frame: GrayFrame,
        bitmap: MotionBitmap,
    },
}

/// What the sensor saw in a single frame, before mode bookkeeping.
#[derive(Debug, Clone)]
pub struct SenseResult {
    /// Eroded motion bitmap.
    pub bitmap: MotionBitmap,
    /// Projections of the eroded bitmap.
    pub projections: ProjectionPair,
    /// Whether the alarm constraints were met this frame.
    pub alarm: bool,
    /// Hot count before erosion (op accounting).
    pub raw_hot: u32,
}

#[derive(Debug, Clone)]
pub struct SensorState {
    pub config: SensorConfig,
    pub mode: SensorMode,
    burst_remaining: u32,
    background: Option<Vec<f64>>,
    bg_rows: usize,
    bg_cols: usize,
}

impl SensorState {
    pub fn new(config: SensorConfig) -> Result<Self> {
        config.validate()?;
        Ok(SensorState {
            config,
            mode: SensorMode::MotionDetection,
            burst_remaining: 0,
            background: None,
            bg_rows: 0,
            bg_cols: 0,
        })
    }

    /// Threshold the frame against the running background, then fold the
    /// frame into the background. The background is seeded with the first
    /// frame, so the first call never reports motion.
    pub fn motion_step(&mut self, frame: &GrayFrame) -> Result<MotionBitmap> {
        let (rows, cols) = (frame.rows(), frame.cols());
        let bg = match &mut self.background {
            Some(bg) => {
                if (self.bg_rows, self.bg_cols) != (rows, cols) {
                    return Err(Error::FrameDims {
                        got_rows: rows,
                        got_cols: cols,
                        want: "same dimensions as the first frame",
                    });
                }
                bg
            }
            None => {
                self.bg_rows = rows;
                self.bg_cols = cols;
                self.background = Some(frame.pixels().iter().map(|&p| p as f64).collect());
                self.background.as_mut().unwrap()
            }
        };
        let mut bm = MotionBitmap::with_dims(rows, cols);
        let theta = self.config.theta;
        let alpha = self.config.alpha;
        for r in 0..rows {
            for c in 0..cols {
                let i = r * cols + c;
                let f = frame.pixels()[i] as f64;
                if (f - bg[i]).abs() > theta {
                    bm.set(r, c, true);
                }
                bg[i] += alpha * (f - bg[i]);
            }
        }
        Ok(bm)
    }

    /// Full per-frame observation without mode bookkeeping: subsample if
    /// needed, run background subtraction, erode, project, check the alarm.
    pub fn observe(&mut self, frame: &GrayFrame) -> Result<SenseResult> {
        let qq;
        let qq_ref = if frame.rows().is_multiple_of(4) && frame.cols().is_multiple_of(4) && !frame.is_qqvga() {
            qq = subsample_qqvga(frame)?;
            &qq
        } else {
            frame
        };
        let raw = self.motion_step(qq_ref)?;
        let raw_hot = raw.count_hot();
        let bitmap = erode(&raw, self.config.erosion_k);
        let projections = project(&bitmap);
        let alarm = check_alarm(&projections, &self.config);
        Ok(SenseResult {
            bitmap,
            projections,
            alarm,
            raw_hot,
        })
    }

    /// Advance the sensor state machine by one frame.
    ///
    /// Accepts full-resolution frames (delivered bursts then carry the
    /// bitmap in the pixel LSBs) or already-subsampled QQVGA frames, which
    /// are delivered as-is.
    pub fn sensor_tick(&mut self, frame: &GrayFrame) -> Result<SensorEvent> {
        Ok(self.tick_full(frame)?.0)
    }

    /// Like `sensor_tick`, but also hands back the raw sense result so
    /// callers can account for the work done inside the sensor.
    pub fn tick_full(&mut self, frame: &GrayFrame) -> Result<(SensorEvent, SenseResult)> {
        if !frame.is_vga() && !frame.is_qqvga() {
            return Err(Error::FrameDims {
                got_rows: frame.rows(),
                got_cols: frame.cols(),
                want: "640x480 or 160x120",
            });
        }
        let sensed = self.observe(frame)?;
        let event = match self.mode {
            SensorMode::MotionDetection => {
                if sensed.alarm {
                    self.mode = SensorMode::Imaging;
                    self.burst_remaining = self.config.burst_len;
                    SensorEvent::AlarmRaised
                } else {
                    SensorEvent::NoEvent
                }
            }
            SensorMode::Imaging => {
                let out = if frame.is_vga() {
                    encode_lsb(frame, &sensed.bitmap)?
                } else {
                    frame.clone()
                };
                self.burst_remaining -= 1;
                if self.burst_remaining == 0 {
                    self.mode = SensorMode::MotionDetection;
                }
                SensorEvent::FrameDelivered {
                    frame: out,
                    bitmap: sensed.bitmap.clone(),
                }
            }
        };
        Ok((event, sensed))
    }
}

/// Reduce a frame to a quarter of its side length: each output pixel is the
/// rounded mean of a 4x4 input block (round half up).
pub fn subsample_qqvga(frame: &GrayFrame) -> Result<GrayFrame> {
    if !frame.rows().is_multiple_of(4) || !frame.cols().is_multiple_of(4) {
        return Err(Error::FrameDims {
            got_rows: frame.rows(),
            got_cols: frame.cols(),
            want: "dimensions divisible by 4",
        });
    }
    let (orows, ocols) = (frame.rows() / 4, frame.cols() / 4);
    let mut out = GrayFrame::new(orows, ocols);
    for r in 0..orows {
        for c in 0..ocols {
            let mut sum = 0u32;
            for dr in 0..4 {
                for dc in 0..4 {
                    sum += frame.get(4 * r + dr, 4 * c + dc) as u32;
                }
            }
            out.set(r, c, ((sum + 8) >> 4) as u8);
        }
    }
    Ok(out)
}

/// Keep a hot pixel only if at least `k` of its 8 neighbours are hot.
/// Outside the grid counts as cold; cold pixels are never promoted.
pub fn erode(bm: &MotionBitmap, k: u8) -> MotionBitmap {
    let (rows, cols) = (bm.rows(), bm.cols());
    let mut out = MotionBitmap::with_dims(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            if !bm.get(r, c) {
                continue;
            }
            let mut hot = 0u8;
            for dr in -1i32..=1 {
                for dc in -1i32..=1 {
                    if dr == 0 && dc == 0 {
                        continue;
                    }
                    let (nr, nc) = (r as i32 + dr, c as i32 + dc);
                    if nr >= 0
                        && nc >= 0
                        && (nr as usize) < rows
                        && (nc as usize) < cols
                        && bm.get(nr as usize, nc as usize)
                    {
                        hot += 1;
                    }
                }
            }
            if hot >= k {
                out.set(r, c, true);
            }
        }
    }
    out
}

fn longest_positive_run(proj: &[u32]) -> usize {
    let mut best = 0;
    let mut cur = 0;
    for &v in proj {
        if v > 0 {
            cur += 1;
            best = best.max(cur);
        } else {
            cur = 0;
        }
    }
    best
}

/// Alarm when both projections contain a contiguous positive run at least
/// as long as the configured minima.
pub fn check_alarm(pp: &ProjectionPair, cfg: &SensorConfig) -> bool {
    longest_positive_run(&pp.x) >= cfg.min_run_x && longest_positive_run(&pp.y) >= cfg.min_run_y
}

/// Hide a bitmap in the LSBs of a full-resolution frame. Every pixel's LSB
/// is cleared, then the top-left pixel of each 4x4 block carries the bitmap
/// cell for that block.
pub fn encode_lsb(frame: &GrayFrame, bm: &MotionBitmap) -> Result<GrayFrame> {
    if frame.rows() != bm.rows() * 4 || frame.cols() != bm.cols() * 4 {
        return Err(Error::FrameDims {
            got_rows: frame.rows(),
            got_cols: frame.cols(),
            want: "4x the bitmap dimensions",
        });
    }
    let mut out = frame.clone();
    for r in 0..frame.rows() {
        for c in 0..frame.cols() {
            let mut v = frame.get(r, c) & !1;
            if r % 4 == 0 && c % 4 == 0 && bm.get(r / 4, c / 4) {
                v |= 1;
            }
            out.set(r, c, v);
        }
    }
    Ok(out)
}

/// Recover the bitmap hidden by `encode_lsb`. Returns the frame with the
/// payload stripped (all LSBs cleared) alongside the bitmap.
pub fn decode_lsb(frame: &GrayFrame) -> Result<(GrayFrame, MotionBitmap)> {
    if !frame.rows().is_multiple_of(4) || !frame.cols().is_multiple_of(4) {
        return Err(Error::FrameDims {
            got_rows: frame.rows(),
            got_cols: frame.cols(),
            want: "dimensions divisible by 4",
        });
    }
    let mut bm = MotionBitmap::with_dims(frame.rows() / 4, frame.cols() / 4);
    let mut out = frame.clone();
    for r in 0..frame.rows() {
        for c in 0..frame.cols() {
            let v = frame.get(r, c);
            if r % 4 == 0 && c % 4 == 0 {
                bm.set(r / 4, c / 4, v & 1 == 1);
            }
            out.set(r, c, v & !1);
        }
    }
    Ok((out, bm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flat_frame(rows: usize, cols: usize, v: u8) -> GrayFrame {
        GrayFrame::from_pixels(rows, cols, vec![v; rows * cols])
    }

    #[test]
    fn subsample_rounds_half_up() {
        // Uniform block: mean is exact.
        let f = flat_frame(4, 4, 10);
        assert_eq!(subsample_qqvga(&f).unwrap().get(0, 0), 10);
        // Sum 167 -> 10.4375 rounds down, sum 168 -> 10.5 rounds up.
        let mut f = flat_frame(4, 4, 10);
        f.set(0, 0, 17);
        assert_eq!(subsample_qqvga(&f).unwrap().get(0, 0), 10);
        f.set(0, 0, 18);
        assert_eq!(subsample_qqvga(&f).unwrap().get(0, 0), 11);
        // All-255 block stays 255.
        assert_eq!(subsample_qqvga(&flat_frame(4, 4, 255)).unwrap().get(0, 0), 255);
    }

    #[test]
    fn subsample_rejects_odd_dimensions() {
        assert!(subsample_qqvga(&flat_frame(5, 8, 0)).is_err());
    }

    #[test]
    fn first_frame_never_reports_motion() {
        let mut st = SensorState::new(SensorConfig::default()).unwrap();
        let f = flat_frame(8, 8, 200);
        let bm = st.motion_step(&f).unwrap();
        assert_eq!(bm.count_hot(), 0);
    }

    #[test]
    fn static_scene_stays_cold() {
        let mut st = SensorState::new(SensorConfig::default()).unwrap();
        let f = flat_frame(8, 8, 120);
        for _ in 0..50 {
            assert_eq!(st.motion_step(&f).unwrap().count_hot(), 0);
        }
    }

    #[test]
    fn step_change_beyond_theta_goes_hot() {
        let mut st = SensorState::new(SensorConfig::default()).unwrap();
        st.motion_step(&flat_frame(8, 8, 50)).unwrap();
        // +16 exceeds the default theta of 15.
        let bm = st.motion_step(&flat_frame(8, 8, 66)).unwrap();
        assert_eq!(bm.count_hot(), 64);
        // +15 exactly does not (strict comparison).
        let mut st = SensorState::new(SensorConfig::default()).unwrap();
        st.motion_step(&flat_frame(8, 8, 50)).unwrap();
        assert_eq!(st.motion_step(&flat_frame(8, 8, 65)).unwrap().count_hot(), 0);
    }

    #[test]
    fn background_follows_ema() {
        let cfg = SensorConfig {
            alpha: 0.25,
            ..SensorConfig::default()
        };
        let mut st = SensorState::new(cfg).unwrap();
        st.motion_step(&flat_frame(2, 2, 100)).unwrap();
        st.motion_step(&flat_frame(2, 2, 180)).unwrap();
        // bg = 100 + 0.25 * (180 - 100) = 120
        let bg = st.background.as_ref().unwrap();
        assert!((bg[0] - 120.0).abs() < 1e-12);
    }

    fn bitmap_from_rows(rows: &[&str]) -> MotionBitmap {
        let mut bm = MotionBitmap::with_dims(rows.len(), rows[0].len());
        for (r, line) in rows.iter().enumerate() {
            for (c, ch) in line.chars().enumerate() {
                bm.set(r, c, ch == '#');
            }
        }
        bm
    }

    #[test]
    fn erode_solid_square() {
        let bm = bitmap_from_rows(&["###", "###", "###"]);
        // Corners have exactly 3 hot neighbours, so k=3 keeps everything.
        assert_eq!(erode(&bm, 3).count_hot(), 9);
        // k=4 drops the corners and leaves the plus shape.
        let plus = erode(&bm, 4);
        assert_eq!(plus.count_hot(), 5);
        assert!(!plus.get(0, 0) && plus.get(0, 1) && plus.get(1, 1));
    }

    #[test]
    fn erode_zero_is_identity() {
        let bm = bitmap_from_rows(&["#..#", ".##.", "#..#"]);
        assert_eq!(erode(&bm, 0), bm);
    }

    #[test]
    fn lone_pixels_die_with_default_k() {
        let bm = bitmap_from_rows(&["#....", ".....", "..#.."]);
        assert_eq!(erode(&bm, 2).count_hot(), 0);
    }

    #[test]
    fn alarm_needs_contiguous_runs_on_both_axes() {
        let cfg = SensorConfig::default(); // min runs 3 and 3
        let solid = bitmap_from_rows(&[".....", ".###.", ".###.", ".###.", "....."]);
        assert!(check_alarm(&project(&solid), &cfg));
        // Wide but flat: x run 3, y run 1.
        let flat = bitmap_from_rows(&[".....", ".###.", ".....", ".....", "....."]);
        assert!(!check_alarm(&project(&flat), &cfg));
        // Split runs do not add up.
        let split = bitmap_from_rows(&["##.##", "##.##", "##.##", "#...#", "....."]);
        assert!(!check_alarm(&project(&split), &cfg));
    }

    #[test]
    fn burst_delivers_exactly_burst_len_frames() {
        let cfg = SensorConfig {
            burst_len: 10,
            ..SensorConfig::default()
        };
        let mut st = SensorState::new(cfg).unwrap();
        let quiet = flat_frame(QQVGA_ROWS, QQVGA_COLS, 60);
        // Two quiet frames: seed the background, then stay silent.
        assert_eq!(st.sensor_tick(&quiet).unwrap(), SensorEvent::NoEvent);
        assert_eq!(st.sensor_tick(&quiet).unwrap(), SensorEvent::NoEvent);
        // A 4x4 block pops just over the threshold: alarm, no delivery
        // yet. Kept dim so the background stays near 60 throughout and
        // the post-burst quiet frame cannot raise a ghost alarm.
        let mut moving = quiet.clone();
        for r in 40..44 {
            for c in 60..64 {
                moving.set(r, c, 80);
            }
        }
        assert_eq!(st.sensor_tick(&moving).unwrap(), SensorEvent::AlarmRaised);
        assert_eq!(st.mode, SensorMode::Imaging);
        // Exactly burst_len deliveries follow, motion or not.
        for i in 0..10 {
            let f = if i % 2 == 0 { &moving } else { &quiet };
            match st.sensor_tick(f).unwrap() {
                SensorEvent::FrameDelivered { frame, .. } => {
                    assert!(frame.is_qqvga());
                }
                other => panic!("expected delivery at burst frame {i}, got {other:?}"),
            }
        }
        assert_eq!(st.mode, SensorMode::MotionDetection);
        assert_eq!(st.sensor_tick(&quiet).unwrap(), SensorEvent::NoEvent);
    }

    #[test]
    fn lsb_round_trip_recovers_bitmap_and_clears_payload() {
        let mut frame = GrayFrame::new(8, 8);
        for r in 0..8 {
            for c in 0..8 {
                frame.set(r, c, (r * 31 + c * 7) as u8);
            }
        }
        let mut bm = MotionBitmap::with_dims(2, 2);
        bm.set(0, 1, true);
        bm.set(1, 0, true);
        let enc = encode_lsb(&frame, &bm).unwrap();
        // Non-lattice pixels have even values; upper bits are untouched.
        for r in 0..8 {
            for c in 0..8 {
                assert_eq!(enc.get(r, c) & !1, frame.get(r, c) & !1);
                if !(r % 4 == 0 && c % 4 == 0) {
                    assert_eq!(enc.get(r, c) & 1, 0);
                }
            }
        }
        let (stripped, back) = decode_lsb(&enc).unwrap();
        assert_eq!(back, bm);
        for (a, b) in stripped.pixels().iter().zip(frame.pixels()) {
            assert_eq!(*a, b & !1);
        }
    }

    fn arb_bitmap(rows: usize, cols: usize) -> impl Strategy<Value = MotionBitmap> {
        proptest::collection::vec(proptest::bool::weighted(0.35), rows * cols).prop_map(
            move |bits| {
                let mut bm = MotionBitmap::with_dims(rows, cols);
                for (i, b) in bits.into_iter().enumerate() {
                    bm.set(i / cols, i % cols, b);
                }
                bm
            },
        )
    }

    proptest! {
        #[test]
        fn erosion_is_anti_extensive_and_monotone(bm in arb_bitmap(12, 12)) {
            let mut prev_hot = bm.count_hot();
            for k in 0..=8u8 {
                let er = erode(&bm, k);
                for r in 0..12 {
                    for c in 0..12 {
                        // Never promotes a cold pixel.
                        prop_assert!(!er.get(r, c) || bm.get(r, c));
                    }
                }
                let hot = er.count_hot();
                prop_assert!(hot <= prev_hot, "k={k} grew the bitmap");
                prev_hot = hot;
            }
        }

        #[test]
        fn lsb_encode_decode_is_exact(bm in arb_bitmap(6, 8), seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut frame = GrayFrame::new(24, 32);
            for r in 0..24 {
                for c in 0..32 {
                    frame.set(r, c, rng.random());
                }
            }
            let enc = encode_lsb(&frame, &bm).unwrap();
            let (_, back) = decode_lsb(&enc).unwrap();
            prop_assert_eq!(back, bm);
        }
    }
}
