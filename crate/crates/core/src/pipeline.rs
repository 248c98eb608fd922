//! The full frame-to-counts pipeline: sensor gating, box proposal,
//! classification, tracking and per-stage operation accounting.
//!
//! In gated mode (the default) frames pass through the sensor state
//! machine and only burst frames reach the detector, so the alarm frame
//! itself is never processed downstream. In continuous mode every frame
//! is processed, which is the reference a gated run is judged against.
//!
//! Each delivered frame also runs the full-scan component labeler next to
//! the projection detector, both for the box-quality comparison and for
//! the cost comparison; the labeler's output never feeds the tracker.

use crate::detect::{
    connected_components_counted, detect_counted, ComparisonAccumulator, DetectionComparison,
    DetectorConfig,
};
use crate::error::{Error, Result};
use crate::opcount::{OpCountReport, OpCounter, StageCounters};
use crate::sensor::{decode_lsb, GrayFrame, SensorConfig, SensorEvent, SensorState};
use crate::svm::{extract_features, SvmModel};
use crate::track::{ClassCounter, Detection, TrackEvent, Tracker, TrackerConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub version: u32,
    /// Process every frame instead of letting the sensor gate delivery.
    pub continuous: bool,
    pub sensor: SensorConfig,
    pub detector: DetectorConfig,
    pub tracker: TrackerConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: 1,
            continuous: false,
            sensor: SensorConfig::default(),
            detector: DetectorConfig::default(),
            tracker: TrackerConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.version != 1 {
            return Err(Error::InvalidConfig(format!(
                "unsupported config version {}",
                self.version
            )));
        }
        self.sensor.validate()?;
        self.detector.validate()?;
        self.tracker.validate()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: PipelineConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Read a directory of `.pgm` frames, sorted by file name. All frames
/// must share dimensions, either full size or small grid.
pub fn load_sequence(dir: &Path) -> Result<Vec<GrayFrame>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::EmptySequence(dir.to_path_buf()));
    }
    let mut frames = Vec::with_capacity(paths.len());
    for p in &paths {
        let frame = crate::netpbm::read_pgm_file(p)?;
        if !frame.is_vga() && !frame.is_qqvga() {
            return Err(Error::FrameDims {
                got_rows: frame.rows(),
                got_cols: frame.cols(),
                want: "640x480 or 160x120",
            });
        }
        if let Some(first) = frames.first() {
            let first: &GrayFrame = first;
            if (first.rows(), first.cols()) != (frame.rows(), frame.cols()) {
                return Err(Error::FrameDims {
                    got_rows: frame.rows(),
                    got_cols: frame.cols(),
                    want: "same dimensions as the first frame",
                });
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub events: Vec<TrackEvent>,
    pub counts: ClassCounter,
    pub ops: OpCountReport,
    pub alarms: u64,
    pub delivered_frames: u64,
    /// Proposal boxes measured against labeler boxes over delivered frames.
    pub comparison: DetectionComparison,
}

/// Cost of the per-frame sensor work on the small grid: subsampling when
/// the input is full size, background subtraction, erosion, projections
/// and the alarm scan. Projections are charged here and not to the
/// detector: the detector reads them, it does not recompute them.
fn charge_sensor(ops: &mut OpCounter, input_was_vga: bool, sensed: &crate::sensor::SenseResult) {
    let cells = (sensed.bitmap.rows() * sensed.bitmap.cols()) as u64;
    if input_was_vga {
        // Sixteen reads, fifteen adds, round and shift, one write per
        // output pixel.
        ops.mem(cells * 17);
        ops.arith(cells * 17);
    }
    // Difference against the background and fold the frame in: two reads
    // and a mask write, difference plus magnitude, threshold, two update
    // steps.
    ops.mem(cells * 3);
    ops.arith(cells * 4);
    ops.cmp(cells);
    // Erosion reads every cell, then counts eight neighbours per hot cell.
    ops.mem(cells + 9 * sensed.raw_hot as u64);
    ops.arith(8 * sensed.raw_hot as u64);
    ops.cmp(cells + sensed.raw_hot as u64);
    // Projections: one read and one zero-test per cell, two bumps per hot.
    ops.mem(cells);
    ops.cmp(cells);
    ops.arith(2 * sensed.bitmap.count_hot() as u64);
    // Alarm: run scan over both projections.
    let len = (sensed.projections.x.len() + sensed.projections.y.len()) as u64;
    ops.cmp(len + 2);
    ops.arith(len);
}

/// Normalization, dot product and sign test per classified blob.
fn charge_classify(ops: &mut OpCounter, n_blobs: u64) {
    ops.mem(n_blobs * 16);
    ops.arith(n_blobs * 21);
    ops.cmp(n_blobs * 13);
}

/// Coarse cost of one tracker step: dense 6-state filter algebra per
/// track and per match, pairwise overlaps, and the assignment search.
fn charge_track(ops: &mut OpCounter, n_tracks: u64, n_dets: u64, n_matches: u64, n_spawns: u64) {
    ops.arith(n_tracks * 950);
    ops.mem(n_tracks * 300);
    let pairs = n_tracks * n_dets;
    ops.arith(pairs * 12);
    ops.cmp(pairs * 8);
    ops.mem(pairs * 8);
    let search = pairs * n_tracks.min(n_dets);
    ops.arith(search);
    ops.cmp(search * 2);
    ops.mem(search * 2);
    ops.arith(n_matches * 2600);
    ops.mem(n_matches * 700);
    ops.arith(n_spawns * 60);
    ops.mem(n_spawns * 80);
}

/// Run the pipeline over a frame sequence with a trained classifier.
pub fn run_pipeline(
    frames: &[GrayFrame],
    config: &PipelineConfig,
    model: &SvmModel,
) -> Result<RunOutput> {
    config.validate()?;
    model.validate()?;
    let mut sensor = SensorState::new(config.sensor.clone())?;
    let mut tracker = Tracker::new(config.tracker.clone())?;
    let mut ops = OpCountReport::new();
    let mut comparison = ComparisonAccumulator::new();
    let mut events = Vec::new();
    let mut alarms = 0u64;
    let mut delivered = 0u64;

    for (t, frame) in frames.iter().enumerate() {
        let t = t as u64;
        let mut stages = StageCounters::default();
        let delivered_bitmap = if config.continuous {
            let sensed = sensor.observe(frame)?;
            charge_sensor(&mut stages.sensor, frame.is_vga(), &sensed);
            Some(sensed.bitmap)
        } else {
            let (event, sensed) = sensor.tick_full(frame)?;
            charge_sensor(&mut stages.sensor, frame.is_vga(), &sensed);
            match event {
                SensorEvent::NoEvent => None,
                SensorEvent::AlarmRaised => {
                    alarms += 1;
                    None
                }
                SensorEvent::FrameDelivered { frame: out, bitmap } => {
                    // Consume the burst frame the way a receiver would:
                    // full-size frames carry the bitmap in their pixels.
                    if out.is_vga() {
                        Some(decode_lsb(&out)?.1)
                    } else {
                        Some(bitmap)
                    }
                }
            }
        };

        if let Some(bm) = delivered_bitmap {
            delivered += 1;
            // The sensor already built the projections for its alarm, so
            // the detector's read of them lands in a discard counter.
            let mut resensed = OpCounter::default();
            let blobs = detect_counted(
                &bm,
                &config.detector,
                &mut resensed,
                &mut stages.detect,
                &mut stages.features,
            );
            let mut detections = Vec::with_capacity(blobs.len());
            for blob in &blobs {
                let features = extract_features(blob)?;
                let (class, _) = model.predict(&features);
                detections.push(Detection {
                    bbox: blob.bbox,
                    class,
                });
            }
            charge_classify(&mut stages.classify, blobs.len() as u64);

            let n_tracks = tracker.tracks().len() as u64;
            let step_events = tracker.step(t, &detections);
            let n_matches = step_events
                .iter()
                .filter(|e| e.kind == crate::track::TrackEventKind::Match)
                .count() as u64;
            let n_spawns = step_events
                .iter()
                .filter(|e| e.kind == crate::track::TrackEventKind::Spawn)
                .count() as u64;
            charge_track(
                &mut stages.track,
                n_tracks,
                detections.len() as u64,
                n_matches,
                n_spawns,
            );
            events.extend(step_events);

            let reference = connected_components_counted(&bm, &mut stages.cc_baseline);
            comparison.add_frame(&blobs, &reference);
        }
        ops.push_frame(t, stages);
    }

    events.extend(tracker.finalize(frames.len() as u64));
    Ok(RunOutput {
        events,
        counts: tracker.counter,
        ops,
        alarms,
        delivered_frames: delivered,
        comparison: comparison.finish(),
    })
}

/// One JSON object per line, in event order.
pub fn events_to_jsonl(events: &[TrackEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events always serialize"));
        out.push('\n');
    }
    out
}

pub fn write_event_log(path: &Path, events: &[TrackEvent]) -> Result<()> {
    std::fs::write(path, events_to_jsonl(events)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::synth_dataset;
    use crate::svm::{svm_train, Class, TrainParams};
    use crate::synth::{scene_car_and_pedestrians, scene_single_car};

    use crate::synth::scene_config;

    fn scene_model() -> SvmModel {
        let ds = synth_dataset(132, 7);
        svm_train(&ds, &TrainParams::default()).unwrap()
    }

    #[test]
    fn single_car_scene_counts_one_car() {
        let scene = scene_single_car();
        let out = run_pipeline(&scene.frames_qqvga(), &scene_config(), &scene_model()).unwrap();
        assert_eq!(out.counts, ClassCounter { car: 1, pedestrian: 0 });
        assert!(out.alarms >= 2, "alarms = {}", out.alarms);
        assert!(out.delivered_frames > 10);
        // Gating must actually gate: alarm frames are not delivered.
        assert!(out.delivered_frames < scene.n_frames as u64);
    }

    #[test]
    fn mixed_scene_counts_every_object() {
        let scene = scene_car_and_pedestrians();
        let out = run_pipeline(&scene.frames_qqvga(), &scene_config(), &scene_model()).unwrap();
        assert_eq!(out.counts, ClassCounter { car: 1, pedestrian: 2 });
    }

    #[test]
    fn continuous_mode_processes_every_frame() {
        let scene = scene_single_car();
        let mut cfg = scene_config();
        cfg.continuous = true;
        let out = run_pipeline(&scene.frames_qqvga(), &cfg, &scene_model()).unwrap();
        assert_eq!(out.delivered_frames, scene.n_frames as u64);
        assert_eq!(out.alarms, 0);
        assert_eq!(out.counts, ClassCounter { car: 1, pedestrian: 0 });
    }

    #[test]
    fn gated_run_is_deterministic() {
        let scene = scene_car_and_pedestrians();
        let frames = scene.frames_qqvga();
        let model = scene_model();
        let a = run_pipeline(&frames, &scene_config(), &model).unwrap();
        let b = run_pipeline(&frames, &scene_config(), &model).unwrap();
        assert_eq!(events_to_jsonl(&a.events), events_to_jsonl(&b.events));
        assert_eq!(
            serde_json::to_string(&a.ops).unwrap(),
            serde_json::to_string(&b.ops).unwrap()
        );
    }

    #[test]
    fn full_size_and_small_frames_agree() {
        let scene = scene_single_car();
        let model = scene_model();
        let cfg = scene_config();
        let small = run_pipeline(&scene.frames_qqvga(), &cfg, &model).unwrap();
        let big = run_pipeline(&scene.frames_vga(), &cfg, &model).unwrap();
        assert_eq!(events_to_jsonl(&small.events), events_to_jsonl(&big.events));
        assert_eq!(small.counts, big.counts);
        assert_eq!(small.alarms, big.alarms);
        // Identical work downstream of the sensor; only subsampling cost
        // differs.
        assert_eq!(small.ops.totals.detect, big.ops.totals.detect);
        assert_eq!(small.ops.totals.features, big.ops.totals.features);
        assert_eq!(small.ops.totals.cc_baseline, big.ops.totals.cc_baseline);
        assert!(big.ops.totals.sensor.total() > small.ops.totals.sensor.total());
    }

    #[test]
    fn detect_stays_far_below_labeling_cost() {
        let scene = scene_car_and_pedestrians();
        let out = run_pipeline(&scene.frames_qqvga(), &scene_config(), &scene_model()).unwrap();
        let share = out.ops.detect_share_of_baseline().unwrap();
        assert!(share < 0.2, "share = {share}");
        assert!(share > 0.0);
    }

    #[test]
    fn proposals_match_labeling_when_bands_stay_disjoint() {
        let scene = scene_car_and_pedestrians();
        let out = run_pipeline(&scene.frames_qqvga(), &scene_config(), &scene_model()).unwrap();
        let cmp = out.comparison;
        assert_eq!(cmp.frames, out.delivered_frames);
        // Solid rectangles whose column extents never overlap: every
        // proposal is the tight component box.
        assert_eq!(cmp.extra, 0);
        assert_eq!(cmp.missed, 0);
        assert!(cmp.mean_iou.unwrap() > 0.999, "mean iou = {:?}", cmp.mean_iou);
    }

    #[test]
    fn event_log_lines_are_json_objects() {
        let scene = scene_single_car();
        let out = run_pipeline(&scene.frames_qqvga(), &scene_config(), &scene_model()).unwrap();
        let log = events_to_jsonl(&out.events);
        assert!(!log.is_empty());
        for line in log.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            assert!(v.get("frame").is_some() && v.get("event").is_some());
        }
        let counts = out
            .events
            .iter()
            .filter(|e| e.kind == crate::track::TrackEventKind::Count)
            .count() as u32;
        assert_eq!(counts, out.counts.car + out.counts.pedestrian);
    }

    #[test]
    fn config_json_round_trip_and_validation() {
        let cfg = scene_config();
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);

        let partial: PipelineConfig = serde_json::from_str(r#"{"continuous": true}"#).unwrap();
        assert!(partial.continuous);
        assert_eq!(partial.sensor.burst_len, 10);

        let unknown: std::result::Result<PipelineConfig, _> =
            serde_json::from_str(r#"{"burst": 3}"#);
        assert!(unknown.is_err());

        let mut bad = scene_config();
        bad.sensor.alpha = 1.5;
        assert!(bad.validate().is_err());
        let mut badv = scene_config();
        badv.version = 2;
        assert!(badv.validate().is_err());
    }

    #[test]
    fn sequence_loading_sorts_and_checks_dims() {
        use crate::netpbm::write_pgm_file;
        let dir = tempfile::tempdir().unwrap();
        let scene = scene_single_car();
        // Write out of order; the loader must sort by name.
        for t in [2u32, 0, 1] {
            let frame = scene.render_qqvga(t);
            write_pgm_file(&frame, &dir.path().join(format!("frame_{t:04}.pgm"))).unwrap();
        }
        let frames = load_sequence(dir.path()).unwrap();
        assert_eq!(frames.len(), 3);
        for (t, f) in frames.iter().enumerate() {
            assert_eq!(f, &scene.render_qqvga(t as u32));
        }

        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_sequence(empty.path()),
            Err(Error::EmptySequence(_))
        ));

        write_pgm_file(&scene.render_vga(3), &dir.path().join("frame_9999.pgm")).unwrap();
        assert!(matches!(
            load_sequence(dir.path()),
            Err(Error::FrameDims { .. })
        ));
    }

    #[test]
    fn evaluation_of_scene_runs_is_clean() {
        use crate::eval::evaluate;
        let model = scene_model();
        for scene in [scene_single_car(), scene_car_and_pedestrians()] {
            let out = run_pipeline(&scene.frames_qqvga(), &scene_config(), &model).unwrap();
            let report = evaluate(&scene.truth, &out.counts);
            for (class, entry) in [(Class::Car, report.car), (Class::Pedestrian, report.pedestrian)] {
                if scene.truth.count(class) > 0 {
                    assert_eq!(entry.error, Some(0.0), "{} {class}", scene.name);
                }
            }
        }
    }
}
