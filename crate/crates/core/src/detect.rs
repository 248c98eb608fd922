//! Region proposal from projections, and the full labeling baseline.
//!
//! The cheap detector never scans the bitmap: it cuts each projection into
//! contiguous positive runs and proposes the Cartesian product of the x and
//! y runs as candidate boxes. Only the candidates are then touched on the
//! bitmap, to drop the empty cross products. `connected_components` is the
//! conventional full-scan alternative kept as a comparison baseline; both
//! produce the same `Blob` shape so their outputs can be matched 1:1.

use crate::bitmap::{moments, project, Moments, MotionBitmap};
use crate::error::Result;
use crate::geometry::{iou, BoundingBox};
use crate::opcount::OpCounter;
use serde::Serialize;

/// Inclusive index run within a projection vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub lo: usize,
    pub hi: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BlobSource {
    /// Proposed from projection runs.
    Proposal,
    /// Extracted by connected-component labeling.
    Component,
}

/// A detected region: box, its moments, and which detector produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Blob {
    pub bbox: BoundingBox,
    pub moments: Moments,
    pub source: BlobSource,
}

/// Detector tuning: projection activity threshold and the minimum hot-pixel
/// count for a proposal to survive.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct DetectorConfig {
    pub tau: u32,
    pub min_area: u32,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { tau: 0, min_area: 4 }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_area == 0 {
            return Err(crate::error::Error::InvalidConfig(
                "min_area must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Maximal runs of entries strictly above `tau`.
pub fn extract_intervals(proj: &[u32], tau: u32) -> Vec<Interval> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    for (i, &v) in proj.iter().enumerate() {
        if v > tau {
            if start.is_none() {
                start = Some(i);
            }
        } else if let Some(lo) = start.take() {
            out.push(Interval { lo, hi: i - 1 });
        }
    }
    if let Some(lo) = start {
        out.push(Interval { lo, hi: proj.len() - 1 });
    }
    out
}

/// Cartesian product of the axis runs, row-major (y outer, x inner).
pub fn propose_regions(x_runs: &[Interval], y_runs: &[Interval]) -> Vec<BoundingBox> {
    let mut out = Vec::with_capacity(x_runs.len() * y_runs.len());
    for yr in y_runs {
        for xr in x_runs {
            out.push(BoundingBox::new(
                xr.lo as i32,
                yr.lo as i32,
                xr.hi as i32,
                yr.hi as i32,
            ));
        }
    }
    out
}

/// Drop candidate boxes with fewer than `min_area` hot pixels; the rest
/// become blobs with their moments attached.
pub fn filter_empty(
    bm: &MotionBitmap,
    candidates: &[BoundingBox],
    min_area: u32,
) -> Result<Vec<Blob>> {
    let mut out = Vec::new();
    for bbox in candidates {
        let m = moments(bm, bbox)?;
        if m.m00 >= min_area {
            out.push(Blob {
                bbox: *bbox,
                moments: m,
                source: BlobSource::Proposal,
            });
        }
    }
    Ok(out)
}

/// Projection-run detector. Output order is row-major over the surviving
/// proposals and fully deterministic.
pub fn detect(bm: &MotionBitmap, cfg: &DetectorConfig) -> Vec<Blob> {
    let (mut a, mut b, mut c) = Default::default();
    detect_counted(bm, cfg, &mut a, &mut b, &mut c)
}

/// `detect` with its cost model attached.
///
/// Charging rules, per frame:
/// - `sensor_ops`: building the projections; one memory touch and one
///   comparison per cell, two arithmetic per hot pixel. On the device the
///   projections fall out of the alarm hardware, so this cost is the
///   sensor's, not the detector's.
/// - `detect_ops`: interval extraction (one read and one comparison per
///   projection entry, two writes per emitted run) and proposal emission
///   (four writes per candidate box).
/// - `features_ops`: the moment scan of each candidate (one read and one
///   comparison per covered cell, five arithmetic per hot pixel, twelve
///   arithmetic plus one comparison to finalize each candidate).
pub fn detect_counted(
    bm: &MotionBitmap,
    cfg: &DetectorConfig,
    sensor_ops: &mut OpCounter,
    detect_ops: &mut OpCounter,
    features_ops: &mut OpCounter,
) -> Vec<Blob> {
    let cells = (bm.rows() * bm.cols()) as u64;
    let pp = project(bm);
    sensor_ops.mem(cells);
    sensor_ops.cmp(cells);
    sensor_ops.arith(2 * bm.count_hot() as u64);

    let xi = extract_intervals(&pp.x, cfg.tau);
    let yi = extract_intervals(&pp.y, cfg.tau);
    detect_ops.mem((pp.x.len() + pp.y.len()) as u64);
    detect_ops.cmp((pp.x.len() + pp.y.len()) as u64);
    detect_ops.mem(2 * (xi.len() + yi.len()) as u64);

    let candidates = propose_regions(&xi, &yi);
    detect_ops.mem(4 * candidates.len() as u64);

    let blobs = filter_empty(bm, &candidates, cfg.min_area)
        .expect("proposals are in bounds by construction");
    for bbox in &candidates {
        features_ops.mem(bbox.area() as u64);
        features_ops.cmp(bbox.area() as u64 + 1);
        features_ops.arith(12);
    }
    for blob in &blobs {
        features_ops.arith(5 * blob.moments.m00 as u64);
    }
    blobs
}

/// 8-connected component labeling over the full bitmap. Components are
/// returned in raster order of their first pixel, each reduced to its tight
/// bounding box with moments taken over that box.
pub fn connected_components(bm: &MotionBitmap) -> Vec<Blob> {
    connected_components_counted(bm, &mut OpCounter::default())
}

/// `connected_components` with its cost model attached.
///
/// Charging rules: the first pass pays one read and one comparison per
/// cell, plus four neighbour reads, four comparisons, one label write and
/// one union bookkeeping step per hot pixel. The second pass pays one read
/// and one comparison per cell, plus a root lookup (two reads, one
/// comparison) and four box-bound updates per hot pixel. Per-component
/// moments are charged to nobody here: the comparison of interest is box
/// extraction against box extraction.
pub fn connected_components_counted(bm: &MotionBitmap, ops: &mut OpCounter) -> Vec<Blob> {
    let (rows, cols) = (bm.rows(), bm.cols());
    let cells = (rows * cols) as u64;
    let mut labels = vec![0u32; rows * cols];
    // parent[l] for provisional labels starting at 1; parent[0] unused.
    let mut parent: Vec<u32> = vec![0];

    fn find(parent: &mut [u32], mut l: u32) -> u32 {
        while parent[l as usize] != l {
            parent[l as usize] = parent[parent[l as usize] as usize];
            l = parent[l as usize];
        }
        l
    }

    ops.mem(cells);
    ops.cmp(cells);
    for r in 0..rows {
        for c in 0..cols {
            if !bm.get(r, c) {
                continue;
            }
            ops.mem(4);
            ops.cmp(4);
            let mut best = 0u32;
            let mut neighbours = [0u32; 4];
            let mut n = 0;
            let prior = [
                (r as i32, c as i32 - 1),
                (r as i32 - 1, c as i32 - 1),
                (r as i32 - 1, c as i32),
                (r as i32 - 1, c as i32 + 1),
            ];
            for (nr, nc) in prior {
                if nr >= 0 && nc >= 0 && (nc as usize) < cols {
                    let l = labels[nr as usize * cols + nc as usize];
                    if l != 0 {
                        neighbours[n] = l;
                        n += 1;
                        let root = find(&mut parent, l);
                        if best == 0 || root < best {
                            best = root;
                        }
                    }
                }
            }
            let label = if best == 0 {
                let l = parent.len() as u32;
                parent.push(l);
                l
            } else {
                for &l in &neighbours[..n] {
                    let root = find(&mut parent, l);
                    parent[root as usize] = best;
                }
                best
            };
            labels[r * cols + c] = label;
            ops.mem(1);
            ops.arith(1);
        }
    }

    // Second pass: resolve roots, index components in raster order of first
    // appearance, grow tight boxes.
    let mut order: Vec<u32> = Vec::new();
    let mut slot: Vec<Option<usize>> = vec![None; parent.len()];
    let mut boxes: Vec<(usize, usize, usize, usize)> = Vec::new();
    ops.mem(cells);
    ops.cmp(cells);
    for r in 0..rows {
        for c in 0..cols {
            let l = labels[r * cols + c];
            if l == 0 {
                continue;
            }
            ops.mem(2);
            ops.cmp(1);
            let root = find(&mut parent, l);
            let idx = match slot[root as usize] {
                Some(i) => i,
                None => {
                    let i = boxes.len();
                    slot[root as usize] = Some(i);
                    order.push(root);
                    boxes.push((c, r, c, r));
                    i
                }
            };
            let b = &mut boxes[idx];
            b.0 = b.0.min(c);
            b.1 = b.1.min(r);
            b.2 = b.2.max(c);
            b.3 = b.3.max(r);
            ops.mem(4);
        }
    }

    boxes
        .into_iter()
        .map(|(x0, y0, x1, y1)| {
            let bbox = BoundingBox::new(x0 as i32, y0 as i32, x1 as i32, y1 as i32);
            let m = moments(bm, &bbox).expect("component box is in bounds");
            Blob {
                bbox,
                moments: m,
                source: BlobSource::Component,
            }
        })
        .collect()
}

/// Aggregate agreement between proposal-based and labeling-based outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionComparison {
    pub frames: u64,
    pub proposals: u64,
    pub references: u64,
    pub matched: u64,
    /// Proposals left without a reference partner.
    pub extra: u64,
    /// References left without a proposal partner.
    pub missed: u64,
    pub mean_iou: Option<f64>,
    /// Mean proposal area over matched reference area.
    pub mean_area_ratio: Option<f64>,
}

impl DetectionComparison {
    pub fn extra_per_frame(&self) -> f64 {
        if self.frames == 0 {
            0.0
        } else {
            self.extra as f64 / self.frames as f64
        }
    }
}

/// Accumulates comparisons over a frame sequence.
#[derive(Debug, Default, Clone)]
pub struct ComparisonAccumulator {
    frames: u64,
    proposals: u64,
    references: u64,
    matched: u64,
    extra: u64,
    missed: u64,
    sum_iou: f64,
    sum_ratio: f64,
}

impl ComparisonAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Greedy matching by descending overlap; ties break on lower proposal
    /// index, then lower reference index. Pairs with zero overlap never
    /// match.
    pub fn add_frame(&mut self, proposals: &[Blob], reference: &[Blob]) {
        self.frames += 1;
        self.proposals += proposals.len() as u64;
        self.references += reference.len() as u64;
        let mut pairs = Vec::new();
        for (i, p) in proposals.iter().enumerate() {
            for (j, r) in reference.iter().enumerate() {
                let v = iou(&p.bbox, &r.bbox);
                if v > 0.0 {
                    pairs.push((v, i, j));
                }
            }
        }
        pairs.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .expect("iou is never NaN")
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        let mut used_p = vec![false; proposals.len()];
        let mut used_r = vec![false; reference.len()];
        let mut matched = 0u64;
        for (v, i, j) in pairs {
            if used_p[i] || used_r[j] {
                continue;
            }
            used_p[i] = true;
            used_r[j] = true;
            matched += 1;
            self.sum_iou += v;
            self.sum_ratio += proposals[i].bbox.area() as f64 / reference[j].bbox.area() as f64;
        }
        self.matched += matched;
        self.extra += proposals.len() as u64 - matched;
        self.missed += reference.len() as u64 - matched;
    }

    pub fn finish(&self) -> DetectionComparison {
        let (mean_iou, mean_area_ratio) = if self.matched > 0 {
            (
                Some(self.sum_iou / self.matched as f64),
                Some(self.sum_ratio / self.matched as f64),
            )
        } else {
            (None, None)
        };
        DetectionComparison {
            frames: self.frames,
            proposals: self.proposals,
            references: self.references,
            matched: self.matched,
            extra: self.extra,
            missed: self.missed,
            mean_iou,
            mean_area_ratio,
        }
    }
}

/// Single-frame comparison of proposals against a reference set.
pub fn compare_detections(proposals: &[Blob], reference: &[Blob]) -> DetectionComparison {
    let mut acc = ComparisonAccumulator::new();
    acc.add_frame(proposals, reference);
    acc.finish()
}
