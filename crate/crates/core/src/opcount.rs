//! Semantic operation counting.
//!
//! Counters tally three kinds of abstract work: comparisons, arithmetic,
//! and memory touches (reads or writes of pixel/label storage). They are a
//! cost model for comparing algorithms, not a cycle counter; the counted
//! variants in `detect` define exactly what each stage is charged for.

use serde::Serialize;

#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct OpCounter {
    pub comparisons: u64,
    pub arithmetic: u64,
    pub memory: u64,
}

impl OpCounter {
    #[inline]
    pub fn cmp(&mut self, n: u64) {
        self.comparisons += n;
    }

    #[inline]
    pub fn arith(&mut self, n: u64) {
        self.arithmetic += n;
    }

    #[inline]
    pub fn mem(&mut self, n: u64) {
        self.memory += n;
    }

    pub fn total(&self) -> u64 {
        self.comparisons + self.arithmetic + self.memory
    }

    pub fn add(&mut self, other: &OpCounter) {
        self.comparisons += other.comparisons;
        self.arithmetic += other.arithmetic;
        self.memory += other.memory;
    }
}

/// Per-stage counters for one frame (or a whole run, in totals).
///
/// `cc_baseline` is the full-scan connected-component labeling run next to
/// the pipeline for comparison; it never feeds the pipeline's own output.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StageCounters {
    pub sensor: OpCounter,
    pub detect: OpCounter,
    pub features: OpCounter,
    pub classify: OpCounter,
    pub track: OpCounter,
    pub cc_baseline: OpCounter,
}

impl StageCounters {
    pub fn add(&mut self, other: &StageCounters) {
        self.sensor.add(&other.sensor);
        self.detect.add(&other.detect);
        self.features.add(&other.features);
        self.classify.add(&other.classify);
        self.track.add(&other.track);
        self.cc_baseline.add(&other.cc_baseline);
    }

    pub fn grand_total(&self) -> u64 {
        self.sensor.total()
            + self.detect.total()
            + self.features.total()
            + self.classify.total()
            + self.track.total()
            + self.cc_baseline.total()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FrameOps {
    pub frame: u64,
    pub stages: StageCounters,
}

#[derive(Debug, Clone, Serialize)]
pub struct OpCountReport {
    pub version: u32,
    pub frames: Vec<FrameOps>,
    pub totals: StageCounters,
}

impl OpCountReport {
    pub fn new() -> Self {
        OpCountReport {
            version: 1,
            frames: Vec::new(),
            totals: StageCounters::default(),
        }
    }

    pub fn push_frame(&mut self, frame: u64, stages: StageCounters) {
        self.totals.add(&stages);
        self.frames.push(FrameOps { frame, stages });
    }

    /// Total detection-stage ops relative to the labeling baseline.
    pub fn detect_share_of_baseline(&self) -> Option<f64> {
        let cc = self.totals.cc_baseline.total();
        if cc == 0 {
            return None;
        }
        Some(self.totals.detect.total() as f64 / cc as f64)
    }
}

impl Default for OpCountReport {
    fn default() -> Self {
        Self::new()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_are_the_sum_of_frames() {
        let mut rep = OpCountReport::new();
        for i in 0..5u64 {
            let mut st = StageCounters::default();
            st.detect.cmp(i + 1);
            st.sensor.mem(2 * i);
            st.cc_baseline.arith(10);
            rep.push_frame(i, st);
        }
        let mut want = StageCounters::default();
        for f in &rep.frames {
            want.add(&f.stages);
        }
        assert_eq!(rep.totals, want);
        assert_eq!(rep.totals.detect.comparisons, 15);
        assert_eq!(rep.totals.cc_baseline.arithmetic, 50);
    }

    #[test]
    fn share_is_none_without_baseline() {
        let rep = OpCountReport::new();
        assert!(rep.detect_share_of_baseline().is_none());
    }
}
