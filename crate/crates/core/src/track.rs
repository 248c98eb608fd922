//! Track lifecycle over detections: predict, associate, update, vote, count.
//!
//! Tracks are born tentative, promoted to active after `n_hits` consecutive
//! matches, and dropped once their miss count exceeds `t_lost`. Unmatched
//! tracks coast on their prediction, so a short occlusion does not lose the
//! identity. Every active track contributes exactly one increment to its
//! voted class counter when it ends, whether by deletion or at the end of
//! the sequence.

use crate::geometry::{iou, BoundingBox};
use crate::hungarian::hungarian;
use crate::kalman::{KalmanParams, KalmanState};
use crate::svm::Class;
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, serde::Deserialize, Serialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Consecutive hits to promote a tentative track.
    pub n_hits: u32,
    /// Misses tolerated before a track is dropped (drop when `miss > t_lost`).
    pub t_lost: u32,
    /// Minimum overlap for an association to stand.
    pub iou_min: f64,
    pub q_pos: f64,
    pub q_vel: f64,
    pub r_pos: f64,
    pub init_vel_var: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        let kp = KalmanParams::default();
        TrackerConfig {
            n_hits: 6,
            t_lost: 1,
            iou_min: 0.3,
            q_pos: kp.q_pos,
            q_vel: kp.q_vel,
            r_pos: kp.r_pos,
            init_vel_var: kp.init_vel_var,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> crate::error::Result<()> {
        if self.n_hits == 0 {
            return Err(crate::error::Error::InvalidConfig(
                "n_hits must be at least 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.iou_min) {
            return Err(crate::error::Error::InvalidConfig(format!(
                "iou_min must be within [0, 1], got {}",
                self.iou_min
            )));
        }
        if self.q_pos < 0.0 || self.q_vel < 0.0 || self.r_pos < 0.0 || self.init_vel_var < 0.0 {
            return Err(crate::error::Error::InvalidConfig(
                "noise scales must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn kalman_params(&self) -> KalmanParams {
        KalmanParams {
            q_pos: self.q_pos,
            q_vel: self.q_vel,
            r_pos: self.r_pos,
            init_vel_var: self.init_vel_var,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Active,
    Deleted,
}

/// One classified detection handed to the tracker.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub bbox: BoundingBox,
    pub class: Class,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub kalman: KalmanState,
    pub status: TrackStatus,
    pub hit_streak: u32,
    pub miss_count: u32,
    /// Votes per class, indexed by `Class as usize`.
    votes: [u32; 2],
    last_vote: Class,
    /// Box of the last matched detection.
    pub last_box: BoundingBox,
    /// Prediction for the current frame.
    pub predicted_box: BoundingBox,
}

impl Track {
    /// Majority class over the track's matched detections; ties go to the
    /// most recent vote.
    pub fn vote_class(&self) -> crate::error::Result<Class> {
        let (car, ped) = (self.votes[Class::Car as usize], self.votes[Class::Pedestrian as usize]);
        if car == 0 && ped == 0 {
            return Err(crate::error::Error::NoVotes);
        }
        Ok(match car.cmp(&ped) {
            std::cmp::Ordering::Greater => Class::Car,
            std::cmp::Ordering::Less => Class::Pedestrian,
            std::cmp::Ordering::Equal => self.last_vote,
        })
    }
}

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClassCounter {
    pub car: u32,
    pub pedestrian: u32,
}

impl ClassCounter {
    pub fn inc(&mut self, class: Class) {
        match class {
            Class::Car => self.car += 1,
            Class::Pedestrian => self.pedestrian += 1,
        }
    }

    pub fn get(&self, class: Class) -> u32 {
        match class {
            Class::Car => self.car,
            Class::Pedestrian => self.pedestrian,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TrackEventKind {
    Spawn,
    Promote,
    Match,
    Miss,
    Delete,
    Count,
}

/// One line of the tracking event log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrackEvent {
    pub frame: u64,
    #[serde(rename = "event")]
    pub kind: TrackEventKind,
    pub track_id: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<Class>,
    #[serde(rename = "box", skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoundingBox>,
}

impl TrackEvent {
    fn new(frame: u64, kind: TrackEventKind, track_id: u64) -> Self {
        TrackEvent {
            frame,
            kind,
            track_id,
            class: None,
            bbox: None,
        }
    }
}

/// Result of matching predictions against detections.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Association {
    /// `(track index, detection index)` pairs, sorted by track index.
    pub matches: Vec<(usize, usize)>,
    pub unmatched_tracks: Vec<usize>,
    pub unmatched_detections: Vec<usize>,
}

/// Association cost: one minus overlap, so perfect overlap costs nothing.
pub fn cost_matrix(predicted: &[BoundingBox], detections: &[BoundingBox]) -> Vec<Vec<f64>> {
    predicted
        .iter()
        .map(|p| detections.iter().map(|d| 1.0 - iou(p, d)).collect())
        .collect()
}

/// Assign detections to predicted boxes at minimum total cost, then break
/// any pair whose overlap falls below `iou_min`.
pub fn associate(
    predicted: &[BoundingBox],
    detections: &[BoundingBox],
    iou_min: f64,
) -> Association {
    if predicted.is_empty() || detections.is_empty() {
        return Association {
            matches: Vec::new(),
            unmatched_tracks: (0..predicted.len()).collect(),
            unmatched_detections: (0..detections.len()).collect(),
        };
    }
    let assignment = hungarian(&cost_matrix(predicted, detections));
    let mut matches = Vec::new();
    let mut track_taken = vec![false; predicted.len()];
    let mut det_taken = vec![false; detections.len()];
    for (ti, di) in assignment {
        if iou(&predicted[ti], &detections[di]) >= iou_min {
            matches.push((ti, di));
            track_taken[ti] = true;
            det_taken[di] = true;
        }
    }
    Association {
        matches,
        unmatched_tracks: (0..predicted.len()).filter(|&i| !track_taken[i]).collect(),
        unmatched_detections: (0..detections.len()).filter(|&i| !det_taken[i]).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct Tracker {
    pub config: TrackerConfig,
    tracks: Vec<Track>,
    next_id: u64,
    pub counter: ClassCounter,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> crate::error::Result<Self> {
        config.validate()?;
        Ok(Tracker {
            config,
            tracks: Vec::new(),
            next_id: 1,
            counter: ClassCounter::default(),
        })
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    /// Advance one delivered frame. Events come out grouped: matches (with
    /// any promotions inline) in track order, then misses with deletions
    /// and counts, then spawns in detection order.
    pub fn step(&mut self, frame: u64, detections: &[Detection]) -> Vec<TrackEvent> {
        let kp = self.config.kalman_params();
        let mut events = Vec::new();

        let predicted: Vec<BoundingBox> = self
            .tracks
            .iter_mut()
            .map(|t| {
                t.predicted_box = t.kalman.predict(&kp);
                t.predicted_box
            })
            .collect();
        let det_boxes: Vec<BoundingBox> = detections.iter().map(|d| d.bbox).collect();
        let assoc = associate(&predicted, &det_boxes, self.config.iou_min);

        for &(ti, di) in &assoc.matches {
            let det = &detections[di];
            let t = &mut self.tracks[ti];
            t.kalman.update(&det.bbox, &kp, frame);
            t.last_box = det.bbox;
            t.hit_streak += 1;
            t.miss_count = 0;
            t.votes[det.class as usize] += 1;
            t.last_vote = det.class;
            let mut ev = TrackEvent::new(frame, TrackEventKind::Match, t.id);
            ev.class = Some(det.class);
            ev.bbox = Some(det.bbox);
            events.push(ev);
            if t.status == TrackStatus::Tentative && t.hit_streak >= self.config.n_hits {
                t.status = TrackStatus::Active;
                events.push(TrackEvent::new(frame, TrackEventKind::Promote, t.id));
            }
        }

        for &ti in &assoc.unmatched_tracks {
            let t = &mut self.tracks[ti];
            t.miss_count += 1;
            t.hit_streak = 0;
            events.push(TrackEvent::new(frame, TrackEventKind::Miss, t.id));
            if t.miss_count > self.config.t_lost {
                let was_active = t.status == TrackStatus::Active;
                t.status = TrackStatus::Deleted;
                events.push(TrackEvent::new(frame, TrackEventKind::Delete, t.id));
                if was_active {
                    let class = t.vote_class().expect("matched at least once");
                    self.counter.inc(class);
                    let mut ev = TrackEvent::new(frame, TrackEventKind::Count, t.id);
                    ev.class = Some(class);
                    events.push(ev);
                }
            }
        }
        self.tracks.retain(|t| t.status != TrackStatus::Deleted);

        for &di in &assoc.unmatched_detections {
            let det = &detections[di];
            let id = self.next_id;
            self.next_id += 1;
            let mut votes = [0u32; 2];
            votes[det.class as usize] += 1;
            let track = Track {
                id,
                kalman: KalmanState::init(&det.bbox, &kp, frame),
                status: TrackStatus::Tentative,
                hit_streak: 1,
                miss_count: 0,
                votes,
                last_vote: det.class,
                last_box: det.bbox,
                predicted_box: det.bbox,
            };
            self.tracks.push(track);
            let mut ev = TrackEvent::new(frame, TrackEventKind::Spawn, id);
            ev.class = Some(det.class);
            ev.bbox = Some(det.bbox);
            events.push(ev);
            if self.config.n_hits <= 1 {
                let t = self.tracks.last_mut().unwrap();
                t.status = TrackStatus::Active;
                events.push(TrackEvent::new(frame, TrackEventKind::Promote, id));
            }
        }
        events
    }

    /// End of sequence: every remaining active track is counted and every
    /// remaining track deleted.
    pub fn finalize(&mut self, frame: u64) -> Vec<TrackEvent> {
        let mut events = Vec::new();
        for t in &mut self.tracks {
            let was_active = t.status == TrackStatus::Active;
            t.status = TrackStatus::Deleted;
            events.push(TrackEvent::new(frame, TrackEventKind::Delete, t.id));
            if was_active {
                let class = t.vote_class().expect("matched at least once");
                self.counter.inc(class);
                let mut ev = TrackEvent::new(frame, TrackEventKind::Count, t.id);
                ev.class = Some(class);
                events.push(ev);
            }
        }
        self.tracks.clear();
        events
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bx(x0: i32, y0: i32, w: i32, h: i32) -> BoundingBox {
        BoundingBox::new(x0, y0, x0 + w - 1, y0 + h - 1)
    }

    fn det(b: BoundingBox, class: Class) -> Detection {
        Detection { bbox: b, class }
    }

    #[test]
    fn promotion_needs_n_consecutive_hits() {
        let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
        let b = bx(10, 10, 10, 20);
        let evs = tr.step(0, &[det(b, Class::Pedestrian)]);
        assert_eq!(evs.len(), 1);
        assert_eq!(evs[0].kind, TrackEventKind::Spawn);
        for f in 1..5 {
            let evs = tr.step(f, &[det(b, Class::Pedestrian)]);
            assert_eq!(evs.iter().filter(|e| e.kind == TrackEventKind::Promote).count(), 0, "frame {f}");
        }
        // Sixth consecutive hit promotes.
        let evs = tr.step(5, &[det(b, Class::Pedestrian)]);
        assert!(evs.iter().any(|e| e.kind == TrackEventKind::Promote));
        assert_eq!(tr.tracks()[0].status, TrackStatus::Active);
    }

    #[test]
    fn a_miss_resets_the_streak() {
        let cfg = TrackerConfig { n_hits: 3, t_lost: 5, ..TrackerConfig::default() };
        let mut tr = Tracker::new(cfg).unwrap();
        let b = bx(10, 10, 10, 10);
        tr.step(0, &[det(b, Class::Car)]);
        tr.step(1, &[det(b, Class::Car)]);
        tr.step(2, &[]); // miss at streak 2
        assert_eq!(tr.tracks()[0].hit_streak, 0);
        tr.step(3, &[det(b, Class::Car)]);
        let evs = tr.step(4, &[det(b, Class::Car)]);
        assert!(!evs.iter().any(|e| e.kind == TrackEventKind::Promote));
        let evs = tr.step(5, &[det(b, Class::Car)]);
        assert!(evs.iter().any(|e| e.kind == TrackEventKind::Promote));
    }

    #[test]
    fn active_track_counts_once_when_lost() {
        let cfg = TrackerConfig { n_hits: 2, t_lost: 1, ..TrackerConfig::default() };
        let mut tr = Tracker::new(cfg).unwrap();
        let b = bx(20, 20, 12, 6);
        tr.step(0, &[det(b, Class::Car)]);
        tr.step(1, &[det(b, Class::Car)]); // promoted
        let evs = tr.step(2, &[]); // miss 1: tolerated
        assert!(evs.iter().all(|e| e.kind == TrackEventKind::Miss));
        assert_eq!(tr.counter.car, 0);
        let evs = tr.step(3, &[]); // miss 2 > t_lost: delete and count
        assert_eq!(
            evs.iter().map(|e| e.kind).collect::<Vec<_>>(),
            vec![TrackEventKind::Miss, TrackEventKind::Delete, TrackEventKind::Count]
        );
        assert_eq!(tr.counter.car, 1);
        assert!(tr.tracks().is_empty());
    }

    #[test]
    fn tentative_track_dies_without_counting() {
        let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
        tr.step(0, &[det(bx(5, 5, 8, 8), Class::Pedestrian)]);
        tr.step(1, &[]);
        tr.step(2, &[]);
        assert!(tr.tracks().is_empty());
        assert_eq!(tr.counter, ClassCounter::default());
    }

    #[test]
    fn majority_vote_with_recency_tiebreak() {
        let cfg = TrackerConfig { n_hits: 1, t_lost: 0, ..TrackerConfig::default() };
        let mut tr = Tracker::new(cfg).unwrap();
        let b = bx(30, 30, 10, 10);
        tr.step(0, &[det(b, Class::Car)]);
        tr.step(1, &[det(b, Class::Pedestrian)]);
        tr.step(2, &[det(b, Class::Car)]);
        assert_eq!(tr.tracks()[0].vote_class().unwrap(), Class::Car);
        // Even it out: the most recent vote wins the tie.
        tr.step(3, &[det(b, Class::Pedestrian)]);
        assert_eq!(tr.tracks()[0].vote_class().unwrap(), Class::Pedestrian);
    }

    #[test]
    fn coasting_bridges_a_one_frame_occlusion() {
        let cfg = TrackerConfig { n_hits: 2, ..TrackerConfig::default() };
        let mut tr = Tracker::new(cfg).unwrap();
        let truth = |t: i32| bx(10 + 4 * t, 40, 12, 8);
        tr.step(0, &[det(truth(0), Class::Car)]);
        for t in 1..5 {
            tr.step(t as u64, &[det(truth(t), Class::Car)]);
        }
        let id = tr.tracks()[0].id;
        tr.step(5, &[]); // occluded for one frame
        assert_eq!(tr.tracks().len(), 1);
        // Reacquire two frames after the last hit: the coasted prediction
        // must still overlap enough to claim the detection.
        let evs = tr.step(6, &[det(truth(6), Class::Car)]);
        assert!(evs.iter().any(|e| e.kind == TrackEventKind::Match && e.track_id == id));
        assert!(!evs.iter().any(|e| e.kind == TrackEventKind::Spawn));
    }

    #[test]
    fn crossing_objects_keep_their_ids() {
        // Two boxes cross in x while staying in distinct rows.
        let cfg = TrackerConfig { n_hits: 2, ..TrackerConfig::default() };
        let mut tr = Tracker::new(cfg).unwrap();
        let left = |t: i32| bx(10 + 5 * t, 10, 10, 10);
        let right = |t: i32| bx(90 - 5 * t, 26, 10, 10);
        tr.step(0, &[det(left(0), Class::Car), det(right(0), Class::Pedestrian)]);
        let ids: Vec<u64> = tr.tracks().iter().map(|t| t.id).collect();
        for t in 1..17 {
            let evs = tr.step(t as u64, &[det(left(t), Class::Car), det(right(t), Class::Pedestrian)]);
            assert!(!evs.iter().any(|e| e.kind == TrackEventKind::Spawn), "frame {t}");
        }
        let end_ids: Vec<u64> = tr.tracks().iter().map(|t| t.id).collect();
        assert_eq!(ids, end_ids);
        assert_eq!(tr.tracks()[0].vote_class().unwrap(), Class::Car);
        assert_eq!(tr.tracks()[1].vote_class().unwrap(), Class::Pedestrian);
    }

    #[test]
    fn gating_rejects_weak_overlap() {
        let a = associate(&[bx(0, 0, 10, 10)], &[bx(8, 8, 10, 10)], 0.3);
        assert!(a.matches.is_empty());
        assert_eq!(a.unmatched_tracks, vec![0]);
        assert_eq!(a.unmatched_detections, vec![0]);
        // Exactly at the threshold the match stands.
        let b1 = bx(0, 0, 10, 10);
        let b2 = bx(0, 5, 10, 10); // overlap 50, union 150, iou 1/3 > 0.3
        let a = associate(&[b1], &[b2], 1.0 / 3.0);
        assert_eq!(a.matches, vec![(0, 0)]);
    }

    #[test]
    fn finalize_counts_each_active_track_once() {
        let cfg = TrackerConfig { n_hits: 2, ..TrackerConfig::default() };
        let mut tr = Tracker::new(cfg).unwrap();
        let b1 = bx(10, 10, 10, 10);
        let b2 = bx(100, 80, 14, 7);
        tr.step(0, &[det(b1, Class::Pedestrian), det(b2, Class::Car)]);
        tr.step(1, &[det(b1, Class::Pedestrian), det(b2, Class::Car)]);
        tr.step(2, &[det(b1, Class::Pedestrian)]); // b2 tentative->active already; now missing once
        let evs = tr.finalize(3);
        assert_eq!(tr.counter, ClassCounter { car: 1, pedestrian: 1 });
        assert_eq!(evs.iter().filter(|e| e.kind == TrackEventKind::Count).count(), 2);
        assert!(tr.tracks().is_empty());
        // A second finalize is a no-op.
        assert!(tr.finalize(4).is_empty());
    }

    fn random_stream(seed: u64) -> Vec<Vec<Detection>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut frames = Vec::new();
        for _ in 0..60 {
            let n = rng.random_range(0..4);
            let dets: Vec<Detection> = (0..n)
                .map(|_| {
                    let x = rng.random_range(0..140);
                    let y = rng.random_range(0..100);
                    let w = rng.random_range(4..20);
                    let h = rng.random_range(4..20);
                    let class = if rng.random_bool(0.5) { Class::Car } else { Class::Pedestrian };
                    det(bx(x, y, w, h), class)
                })
                .collect();
            frames.push(dets);
        }
        frames
    }

    #[test]
    fn event_log_audit_on_random_streams() {
        use std::collections::HashMap;
        for seed in 0..20u64 {
            let mut tr = Tracker::new(TrackerConfig { n_hits: 2, ..TrackerConfig::default() }).unwrap();
            let mut events = Vec::new();
            for (f, dets) in random_stream(seed).iter().enumerate() {
                events.extend(tr.step(f as u64, dets));
            }
            events.extend(tr.finalize(60));
            let mut spawns: HashMap<u64, u32> = HashMap::new();
            let mut deletes: HashMap<u64, u32> = HashMap::new();
            let mut counts: HashMap<u64, u32> = HashMap::new();
            let mut promotes: HashMap<u64, u32> = HashMap::new();
            for e in &events {
                let m = match e.kind {
                    TrackEventKind::Spawn => &mut spawns,
                    TrackEventKind::Delete => &mut deletes,
                    TrackEventKind::Count => &mut counts,
                    TrackEventKind::Promote => &mut promotes,
                    _ => continue,
                };
                *m.entry(e.track_id).or_insert(0) += 1;
            }
            for (&id, &n) in &spawns {
                assert_eq!(n, 1, "seed {seed}: track {id} spawned {n} times");
                assert_eq!(deletes.get(&id), Some(&1), "seed {seed}: track {id} not deleted exactly once");
            }
            for (&id, &n) in &counts {
                assert_eq!(n, 1, "seed {seed}: track {id} counted {n} times");
                assert!(promotes.contains_key(&id), "seed {seed}: counted track {id} never promoted");
            }
            let total: u32 = counts.len() as u32;
            assert_eq!(total, tr.counter.car + tr.counter.pedestrian, "seed {seed}");
        }
    }

    #[test]
    fn identical_streams_produce_identical_logs() {
        let run = || {
            let mut tr = Tracker::new(TrackerConfig::default()).unwrap();
            let mut events = Vec::new();
            for (f, dets) in random_stream(99).iter().enumerate() {
                events.extend(tr.step(f as u64, dets));
            }
            events.extend(tr.finalize(60));
            serde_json::to_string(&events).unwrap()
        };
        assert_eq!(run(), run());
    }
}
