//! Labeled feature datasets: CSV persistence and a synthetic generator.
//!
//! The generator works in scene geometry rather than feature space: it
//! draws an object's distance, derives a plausible box and fill for its
//! class, and only then computes the features a real blob of that shape
//! would produce. Row variance tracks object height tightly, area carries
//! the class's aspect ratio, column variance is blurred by a heavy
//! log-normal smear, and the top edge follows distance with noise, so the
//! feature usefulness ordering (var_y, then area, then the rest) is a
//! property of the scene model, not hand-picked feature values.

use crate::error::{Error, Result};
use crate::svm::{Class, FeatureVec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::path::Path;

pub const CSV_HEADER: &str = "area,var_y,var_x,top_y,label";

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub rows: Vec<(FeatureVec, Class)>,
    /// Where the rows came from (generator parameters, file path, ...).
    pub provenance: String,
}

impl LabeledDataset {
    pub fn new(rows: Vec<(FeatureVec, Class)>, provenance: String) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Dataset("dataset has no rows".into()));
        }
        Ok(LabeledDataset { rows, provenance })
    }

    pub fn count(&self, class: Class) -> usize {
        self.rows.iter().filter(|(_, c)| *c == class).count()
    }

    /// Split into train and test, shuffling within each class so both
    /// splits keep the class balance. `train_frac` is the training share.
    pub fn split(&self, train_frac: f64, seed: u64) -> (LabeledDataset, LabeledDataset) {
        assert!(
            (0.0..=1.0).contains(&train_frac),
            "train_frac must be within [0, 1]"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for class in [Class::Car, Class::Pedestrian] {
            let mut idx: Vec<usize> = (0..self.rows.len())
                .filter(|&i| self.rows[i].1 == class)
                .collect();
            idx.shuffle(&mut rng);
            let n_train = (idx.len() as f64 * train_frac).round() as usize;
            for (k, &i) in idx.iter().enumerate() {
                if k < n_train {
                    train.push(self.rows[i]);
                } else {
                    test.push(self.rows[i]);
                }
            }
        }
        let mk = |rows: Vec<(FeatureVec, Class)>, part: &str| LabeledDataset {
            rows,
            provenance: format!("{} [{part} split, frac={train_frac}, seed={seed}]", self.provenance),
        };
        (mk(train, "train"), mk(test, "test"))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for (f, c) in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                f.area,
                f.var_y,
                f.var_x,
                f.top_y,
                c.label()
            ));
        }
        out
    }

    pub fn from_csv(text: &str, provenance: String) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, header)) if header.trim_end() == CSV_HEADER => {}
            other => {
                return Err(Error::Dataset(format!(
                    "bad csv header {:?}, want {CSV_HEADER:?}",
                    other.map(|(_, h)| h).unwrap_or("")
                )))
            }
        }
        let mut rows = Vec::new();
        for (lineno, line) in lines {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Dataset(format!(
                    "line {}: expected 5 fields, got {}",
                    lineno + 1,
                    fields.len()
                )));
            }
            let mut vals = [0.0f64; 4];
            for (i, v) in vals.iter_mut().enumerate() {
                *v = fields[i].parse().map_err(|_| {
                    Error::Dataset(format!("line {}: bad number {:?}", lineno + 1, fields[i]))
                })?;
            }
            let class = Class::from_label(fields[4]).ok_or_else(|| {
                Error::Dataset(format!("line {}: unknown label {:?}", lineno + 1, fields[4]))
            })?;
            rows.push((FeatureVec::from_array(vals), class));
        }
        LabeledDataset::new(rows, provenance)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_csv(&text, format!("csv:{}", path.display()))
    }
}

/// Scene-geometry parameters of the synthetic generator.
#[derive(Debug, Clone)]
pub struct SynthParams {
    /// Pedestrian height start/span over distance, plus jitter sigma.
    pub ped_h_base: f64,
    pub ped_h_range: f64,
    pub ped_h_jitter: f64,
    /// Pedestrian width as a fraction of height, with relative jitter.
    pub ped_aspect: f64,
    pub ped_aspect_jitter: f64,
    pub car_h_base: f64,
    pub car_h_range: f64,
    pub car_h_jitter: f64,
    /// Car width over height, with absolute jitter.
    pub car_aspect: f64,
    pub car_aspect_jitter: f64,
    /// Fraction of the box the silhouette fills.
    pub fill_mean: f64,
    pub fill_jitter: f64,
    /// Log-normal smear sigmas on the two variances.
    pub var_y_smear: f64,
    pub var_x_smear: f64,
    /// Noise on the vertical placement fraction.
    pub top_noise: f64,
    pub frame_rows: f64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            ped_h_base: 10.0,
            ped_h_range: 26.0,
            ped_h_jitter: 2.0,
            ped_aspect: 0.35,
            ped_aspect_jitter: 0.10,
            car_h_base: 5.0,
            car_h_range: 11.0,
            car_h_jitter: 1.2,
            car_aspect: 2.4,
            car_aspect_jitter: 0.40,
            fill_mean: 0.92,
            fill_jitter: 0.05,
            var_y_smear: 0.15,
            var_x_smear: 0.75,
            top_noise: 0.06,
            frame_rows: 120.0,
        }
    }
}

fn gauss(rng: &mut ChaCha8Rng, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, sigma).expect("valid sigma").sample(rng)
}

fn synth_row(p: &SynthParams, class: Class, rng: &mut ChaCha8Rng) -> FeatureVec {
    // Distance proxy: 0 is far, 1 is near the sensor.
    let d: f64 = rng.random();
    let (h, w) = match class {
        Class::Pedestrian => {
            let h = (p.ped_h_base + p.ped_h_range * d + gauss(rng, p.ped_h_jitter)).clamp(4.0, 48.0);
            let w = (p.ped_aspect * h * (1.0 + gauss(rng, p.ped_aspect_jitter))).clamp(2.0, 0.9 * h);
            (h, w)
        }
        Class::Car => {
            let h = (p.car_h_base + p.car_h_range * d + gauss(rng, p.car_h_jitter)).clamp(3.0, 36.0);
            let aspect = (p.car_aspect + gauss(rng, p.car_aspect_jitter)).clamp(1.4, 3.6);
            (h, aspect * h)
        }
    };
    let fill = (p.fill_mean + gauss(rng, p.fill_jitter)).clamp(0.6, 1.0);
    let area = fill * w * h;
    // A solid band of extent n has variance (n^2 - 1) / 12; the smear
    // stands in for silhouette irregularity.
    let var_y = (h * h - 1.0) / 12.0 * gauss(rng, p.var_y_smear).exp();
    let var_x = (w * w - 1.0) / 12.0 * gauss(rng, p.var_x_smear).exp();
    let place = (0.08 + 0.78 * d + gauss(rng, p.top_noise)).clamp(0.0, 1.0);
    let top_y = (p.frame_rows - h).max(0.0) * place;
    FeatureVec { area, var_y, var_x, top_y }
}

/// Generate `n_per_class` rows per class with the given parameters.
pub fn synth_dataset_with(p: &SynthParams, n_per_class: usize, seed: u64) -> LabeledDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(2 * n_per_class);
    for class in [Class::Car, Class::Pedestrian] {
        for _ in 0..n_per_class {
            rows.push((synth_row(p, class, &mut rng), class));
        }
    }
    LabeledDataset {
        rows,
        provenance: format!("synth(n_per_class={n_per_class}, seed={seed})"),
    }
}

/// Generate with the default scene parameters.
pub fn synth_dataset(n_per_class: usize, seed: u64) -> LabeledDataset {
    synth_dataset_with(&SynthParams::default(), n_per_class, seed)
}
