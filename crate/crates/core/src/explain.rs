//! Model inspection: permutation importance and second-order accumulated
//! local effects.
//!
//! Permutation importance shuffles one feature column at a time and
//! reports the accuracy lost, so it measures what the model actually uses
//! rather than what the weights suggest. The second-order effect grid
//! isolates what a feature pair contributes beyond its two first-order
//! effects: it accumulates the model's local second differences over
//! quantile cells, integrates them, subtracts both first-order margins,
//! and centers the result. An additive model therefore scores an exact
//! zero everywhere, which the tests pin down.

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::svm::{accuracy, FeatureVec, SvmModel, FEATURE_COUNT, FEATURE_NAMES};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::path::Path;

pub const IMPORTANCE_CSV_HEADER: &str = "feature,mean_drop,std_drop";
pub const ALE_CSV_HEADER: &str = "f1_bin,f2_bin,f1_lo,f1_hi,f2_lo,f2_hi,count,ale";

#[derive(Debug, Clone, Serialize)]
pub struct FeatureImportance {
    pub feature: &'static str,
    pub mean_drop: f64,
    pub std_drop: f64,
}

/// Accuracy drop per feature over `repeats` column shuffles.
///
/// One generator drives every shuffle, in feature-major order, so the
/// whole report is a pure function of `(model, rows, repeats, seed)`.
pub fn permutation_importance(
    model: &SvmModel,
    ds: &LabeledDataset,
    repeats: usize,
    seed: u64,
) -> Result<Vec<FeatureImportance>> {
    if repeats == 0 {
        return Err(Error::InvalidConfig("importance repeats must be positive".into()));
    }
    let n = ds.rows.len();
    let baseline = accuracy(model, &ds.rows);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = Vec::with_capacity(FEATURE_COUNT);
    for f in 0..FEATURE_COUNT {
        let mut drops = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let mut correct = 0usize;
            for (i, (feat, class)) in ds.rows.iter().enumerate() {
                let mut a = feat.as_array();
                a[f] = ds.rows[perm[i]].0.as_array()[f];
                if model.predict(&FeatureVec::from_array(a)).0 == *class {
                    correct += 1;
                }
            }
            drops.push(baseline - correct as f64 / n as f64);
        }
        let mean = drops.iter().sum::<f64>() / repeats as f64;
        let var = drops.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / repeats as f64;
        report.push(FeatureImportance {
            feature: FEATURE_NAMES[f],
            mean_drop: mean,
            std_drop: var.sqrt(),
        });
    }
    Ok(report)
}

pub fn importance_csv(report: &[FeatureImportance]) -> String {
    let mut out = String::from(IMPORTANCE_CSV_HEADER);
    out.push('\n');
    for r in report {
        out.push_str(&format!("{},{},{}\n", r.feature, r.mean_drop, r.std_drop));
    }
    out
}

/// Centered second-order effect surface for one feature pair.
#[derive(Debug, Clone, Serialize)]
pub struct AleGrid {
    pub f1: &'static str,
    pub f2: &'static str,
    /// Quantile cell edges, one more than the cell count per axis.
    pub edges1: Vec<f64>,
    pub edges2: Vec<f64>,
    pub counts: Vec<Vec<usize>>,
    pub values: Vec<Vec<f64>>,
}

impl AleGrid {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(ALE_CSV_HEADER);
        out.push('\n');
        for a in 0..self.values.len() {
            for b in 0..self.values[a].len() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{}\n",
                    a,
                    b,
                    self.edges1[a],
                    self.edges1[a + 1],
                    self.edges2[b],
                    self.edges2[b + 1],
                    self.counts[a][b],
                    self.values[a][b]
                ));
            }
        }
        out
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Linear-interpolation quantile edges over `values`, `bins + 1` of them.
/// Repeated values may collapse neighboring edges; the resulting empty
/// cells are filled from their nearest populated neighbor later.
fn quantile_edges(values: &mut [f64], bins: usize) -> Vec<f64> {
    debug_assert!(!values.is_empty() && bins > 0);
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite feature values"));
    let n = values.len();
    (0..=bins)
        .map(|k| {
            let h = (n - 1) as f64 * k as f64 / bins as f64;
            let lo = h.floor() as usize;
            let hi = (lo + 1).min(n - 1);
            values[lo] + (h - lo as f64) * (values[hi] - values[lo])
        })
        .collect()
}

/// Cell index of `x` against `edges`: the minimum is cell 0, and every
/// internal edge closes the cell below it.
fn bin_index(edges: &[f64], x: f64) -> usize {
    let internal = &edges[1..edges.len() - 1];
    internal.partition_point(|&e| e < x)
}

/// Second-order effect of features `f1` and `f2` on an arbitrary scoring
/// function. `bins` counts cells per axis.
pub fn ale_second_order_fn<F>(
    score: F,
    rows: &[FeatureVec],
    f1: usize,
    f2: usize,
    bins: usize,
) -> Result<AleGrid>
where
    F: Fn(&FeatureVec) -> f64,
{
    if f1 >= FEATURE_COUNT || f2 >= FEATURE_COUNT {
        return Err(Error::InvalidConfig(format!(
            "feature index out of range: ({f1}, {f2})"
        )));
    }
    if f1 == f2 {
        return Err(Error::InvalidConfig("effect pair needs two distinct features".into()));
    }
    if bins == 0 {
        return Err(Error::InvalidConfig("effect grid needs at least one cell per axis".into()));
    }
    if rows.is_empty() {
        return Err(Error::Dataset("effect grid needs data rows".into()));
    }

    let mut col1: Vec<f64> = rows.iter().map(|r| r.as_array()[f1]).collect();
    let mut col2: Vec<f64> = rows.iter().map(|r| r.as_array()[f2]).collect();
    let edges1 = quantile_edges(&mut col1, bins);
    let edges2 = quantile_edges(&mut col2, bins);

    // Per-cell count and mean of the corner second difference.
    let mut counts = vec![vec![0usize; bins]; bins];
    let mut sums = vec![vec![0.0f64; bins]; bins];
    for row in rows {
        let arr = row.as_array();
        let a = bin_index(&edges1, arr[f1]);
        let b = bin_index(&edges2, arr[f2]);
        let at = |i: usize, j: usize| {
            let mut m = arr;
            m[f1] = edges1[i];
            m[f2] = edges2[j];
            score(&FeatureVec::from_array(m))
        };
        let d = at(a + 1, b + 1) - at(a, b + 1) - at(a + 1, b) + at(a, b);
        counts[a][b] += 1;
        sums[a][b] += d;
    }
    let mut mean = vec![vec![0.0f64; bins]; bins];
    for a in 0..bins {
        for b in 0..bins {
            if counts[a][b] > 0 {
                mean[a][b] = sums[a][b] / counts[a][b] as f64;
            }
        }
    }
    // Empty cells borrow the nearest populated mean (squared index
    // distance, ties to the lower indices) so integration can cross them.
    let populated: Vec<(usize, usize)> = (0..bins)
        .flat_map(|a| (0..bins).map(move |b| (a, b)))
        .filter(|&(a, b)| counts[a][b] > 0)
        .collect();
    for a in 0..bins {
        for b in 0..bins {
            if counts[a][b] == 0 {
                let &(ka, kb) = populated
                    .iter()
                    .min_by_key(|&&(ka, kb)| {
                        let da = ka as i64 - a as i64;
                        let db = kb as i64 - b as i64;
                        (da * da + db * db, ka, kb)
                    })
                    .expect("at least one populated cell");
                mean[a][b] = mean[ka][kb];
            }
        }
    }

    // Node-indexed double prefix sum of the cell means.
    let mut fh = vec![vec![0.0f64; bins + 1]; bins + 1];
    for a in 0..bins {
        for b in 0..bins {
            fh[a + 1][b + 1] = mean[a][b] + fh[a][b + 1] + fh[a + 1][b] - fh[a][b];
        }
    }

    // First-order margins, count-weighted per band and integrated.
    let band1: Vec<f64> = (0..bins)
        .map(|a| {
            let w: usize = (0..bins).map(|b| counts[a][b]).sum();
            if w > 0 {
                (0..bins)
                    .map(|b| counts[a][b] as f64 * (fh[a + 1][b + 1] - fh[a][b + 1]))
                    .sum::<f64>()
                    / w as f64
            } else {
                (0..bins).map(|b| fh[a + 1][b + 1] - fh[a][b + 1]).sum::<f64>() / bins as f64
            }
        })
        .collect();
    let band2: Vec<f64> = (0..bins)
        .map(|b| {
            let w: usize = (0..bins).map(|a| counts[a][b]).sum();
            if w > 0 {
                (0..bins)
                    .map(|a| counts[a][b] as f64 * (fh[a + 1][b + 1] - fh[a + 1][b]))
                    .sum::<f64>()
                    / w as f64
            } else {
                (0..bins).map(|a| fh[a + 1][b + 1] - fh[a + 1][b]).sum::<f64>() / bins as f64
            }
        })
        .collect();
    let mut e1 = vec![0.0f64; bins + 1];
    let mut e2 = vec![0.0f64; bins + 1];
    for k in 0..bins {
        e1[k + 1] = e1[k] + band1[k];
        e2[k + 1] = e2[k] + band2[k];
    }

    let mut values = vec![vec![0.0f64; bins]; bins];
    for a in 0..bins {
        for b in 0..bins {
            values[a][b] = fh[a + 1][b + 1] - e1[a + 1] - e2[b + 1];
        }
    }
    // Center to a count-weighted zero mean.
    let total: usize = counts.iter().flatten().sum();
    let grand = values
        .iter()
        .zip(&counts)
        .flat_map(|(vr, cr)| vr.iter().zip(cr).map(|(v, c)| v * *c as f64))
        .sum::<f64>()
        / total as f64;
    for row in &mut values {
        for v in row {
            *v -= grand;
        }
    }

    Ok(AleGrid {
        f1: FEATURE_NAMES[f1],
        f2: FEATURE_NAMES[f2],
        edges1,
        edges2,
        counts,
        values,
    })
}

/// Second-order effect of a feature pair on the model margin.
pub fn ale_second_order(
    model: &SvmModel,
    ds: &LabeledDataset,
    f1: usize,
    f2: usize,
    bins: usize,
) -> Result<AleGrid> {
    let rows: Vec<FeatureVec> = ds.rows.iter().map(|(f, _)| *f).collect();
    ale_second_order_fn(|f| model.margin(f), &rows, f1, f2, bins)
}
