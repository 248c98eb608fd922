//! Linear two-class SVM over blob shape features.
//!
//! Features are `(area, var_y, var_x, top_y)`: hot-pixel count, row and
//! column variance of the hot pixels, and the top edge of the box. Inputs
//! are min-max normalized to [0, 1] with the bounds learned at training
//! time; out-of-range values are clamped at prediction time. A positive
//! margin means pedestrian, negative means car, and an exact zero falls to
//! car so the decision is total.

use crate::detect::Blob;
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

pub const FEATURE_COUNT: usize = 4;
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = ["area", "var_y", "var_x", "top_y"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Class {
    Car = 0,
    Pedestrian = 1,
}

impl Class {
    pub fn label(&self) -> &'static str {
        match self {
            Class::Car => "car",
            Class::Pedestrian => "pedestrian",
        }
    }

    pub fn from_label(s: &str) -> Option<Class> {
        match s {
            "car" => Some(Class::Car),
            "pedestrian" => Some(Class::Pedestrian),
            _ => None,
        }
    }

    /// Training target: car is the negative class.
    fn target(&self) -> f64 {
        match self {
            Class::Car => -1.0,
            Class::Pedestrian => 1.0,
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVec {
    pub area: f64,
    pub var_y: f64,
    pub var_x: f64,
    pub top_y: f64,
}

impl FeatureVec {
    pub fn as_array(&self) -> [f64; FEATURE_COUNT] {
        [self.area, self.var_y, self.var_x, self.top_y]
    }

    pub fn from_array(a: [f64; FEATURE_COUNT]) -> Self {
        FeatureVec {
            area: a[0],
            var_y: a[1],
            var_x: a[2],
            top_y: a[3],
        }
    }
}

/// Shape features of a blob. Fails on an empty region, which has no
/// centroid or variance.
pub fn extract_features(blob: &Blob) -> Result<FeatureVec> {
    let stats = blob.moments.stats.ok_or(Error::UndefinedMoments)?;
    Ok(FeatureVec {
        area: blob.moments.m00 as f64,
        var_y: stats.var_y,
        var_x: stats.var_x,
        top_y: blob.bbox.y0 as f64,
    })
}

/// Trained linear model plus the normalization it was fitted under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmModel {
    pub version: u32,
    /// Fixed `[negative, positive]` class names; validated on load.
    pub class_names: [String; 2],
    /// Weights in feature order (area, var_y, var_x, top_y).
    pub weights: [f64; FEATURE_COUNT],
    pub bias: f64,
    pub norm_lo: [f64; FEATURE_COUNT],
    pub norm_hi: [f64; FEATURE_COUNT],
}

impl SvmModel {
    /// Min-max normalize with clamping; a feature that was constant in
    /// training maps to the interval midpoint.
    pub fn normalize(&self, f: &FeatureVec) -> [f64; FEATURE_COUNT] {
        let raw = f.as_array();
        let mut out = [0.0; FEATURE_COUNT];
        for i in 0..FEATURE_COUNT {
            let span = self.norm_hi[i] - self.norm_lo[i];
            out[i] = if span > 0.0 {
                ((raw[i] - self.norm_lo[i]) / span).clamp(0.0, 1.0)
            } else {
                0.5
            };
        }
        out
    }

    pub fn margin(&self, f: &FeatureVec) -> f64 {
        let x = self.normalize(f);
        let dot: f64 = self.weights.iter().zip(&x).map(|(w, v)| w * v).sum();
        self.bias + dot
    }

    /// Class and signed margin. A zero margin is a car.
    pub fn predict(&self, f: &FeatureVec) -> (Class, f64) {
        let m = self.margin(f);
        let class = if m > 0.0 { Class::Pedestrian } else { Class::Car };
        (class, m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != 1 {
            return Err(Error::InvalidModel(format!(
                "unsupported model version {}",
                self.version
            )));
        }
        if self.class_names[0] != "car" || self.class_names[1] != "pedestrian" {
            return Err(Error::InvalidModel(format!(
                "unexpected class names {:?}",
                self.class_names
            )));
        }
        let finite = self.weights.iter().all(|w| w.is_finite())
            && self.bias.is_finite()
            && self.norm_lo.iter().all(|v| v.is_finite())
            && self.norm_hi.iter().all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidModel("non-finite parameters".into()));
        }
        for i in 0..FEATURE_COUNT {
            if self.norm_lo[i] > self.norm_hi[i] {
                return Err(Error::InvalidModel(format!(
                    "normalization bounds inverted for {}",
                    FEATURE_NAMES[i]
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: SvmModel = serde_json::from_str(s)?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainParams {
    /// Regularization strength.
    pub lambda: f64,
    pub epochs: u32,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            lambda: 1e-3,
            epochs: 150,
            seed: 0,
        }
    }
}

/// Train by hinge-loss SGD with the 1/(lambda t) step schedule, visiting
/// the rows in a freshly shuffled order each epoch. The bias rides along as
/// a constant input dimension and is regularized with the weights, which is
/// harmless at these scales and keeps the update uniform.
pub fn svm_train(ds: &crate::dataset::LabeledDataset, params: &TrainParams) -> Result<SvmModel> {
    if ds.rows.is_empty() {
        return Err(Error::Dataset("cannot train on an empty dataset".into()));
    }
    let n_car = ds.rows.iter().filter(|r| r.1 == Class::Car).count();
    if n_car == 0 || n_car == ds.rows.len() {
        return Err(Error::Dataset(
            "training data must contain both classes".into(),
        ));
    }
    if params.lambda.is_nan() || params.lambda <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "lambda must be positive, got {}",
            params.lambda
        )));
    }
    if params.epochs == 0 {
        return Err(Error::InvalidConfig("epochs must be at least 1".into()));
    }

    let mut norm_lo = [f64::INFINITY; FEATURE_COUNT];
    let mut norm_hi = [f64::NEG_INFINITY; FEATURE_COUNT];
    for (f, _) in &ds.rows {
        let a = f.as_array();
        for i in 0..FEATURE_COUNT {
            norm_lo[i] = norm_lo[i].min(a[i]);
            norm_hi[i] = norm_hi[i].max(a[i]);
        }
    }
    let probe = SvmModel {
        version: 1,
        class_names: ["car".into(), "pedestrian".into()],
        weights: [0.0; FEATURE_COUNT],
        bias: 0.0,
        norm_lo,
        norm_hi,
    };
    // Augmented rows: normalized features plus a constant bias input.
    let xs: Vec<[f64; FEATURE_COUNT + 1]> = ds
        .rows
        .iter()
        .map(|(f, _)| {
            let n = probe.normalize(f);
            [n[0], n[1], n[2], n[3], 1.0]
        })
        .collect();
    let ys: Vec<f64> = ds.rows.iter().map(|(_, c)| c.target()).collect();

    let mut w = [0.0f64; FEATURE_COUNT + 1];
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut t: u64 = 0;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (params.lambda * t as f64);
            let mut score = 0.0;
            for d in 0..w.len() {
                score += w[d] * xs[i][d];
            }
            let decay = 1.0 - eta * params.lambda;
            for d in 0..w.len() {
                w[d] *= decay;
            }
            if ys[i] * score < 1.0 {
                for d in 0..w.len() {
                    w[d] += eta * ys[i] * xs[i][d];
                }
            }
        }
    }

    let model = SvmModel {
        weights: [w[0], w[1], w[2], w[3]],
        bias: w[4],
        ..probe
    };
    model.validate()?;
    Ok(model)
}

/// Fraction of rows the model labels correctly.
pub fn accuracy(model: &SvmModel, rows: &[(FeatureVec, Class)]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let hits = rows
        .iter()
        .filter(|(f, c)| model.predict(f).0 == *c)
        .count();
    hits as f64 / rows.len() as f64
}
