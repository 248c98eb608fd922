//! Tracking quality: relative count error per class against ground truth.

use crate::error::{Error, Result};
use crate::svm::Class;
use crate::track::ClassCounter;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Relative count error `(true - tracked) / true`. Negative means
/// overcounting. Undefined when nothing was there to track.
pub fn eval_error(n_true: u32, n_tracked: u32) -> Result<f64> {
    if n_true == 0 {
        return Err(Error::ZeroTruth);
    }
    Ok((n_true as f64 - n_tracked as f64) / n_true as f64)
}

/// Expected object counts for one sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub car: u32,
    pub pedestrian: u32,
}

impl GroundTruth {
    pub fn count(&self, class: Class) -> u32 {
        match class {
            Class::Car => self.car,
            Class::Pedestrian => self.pedestrian,
        }
    }

    pub fn load(path: &Path) -> Result<GroundTruth> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub n_true: u32,
    pub n_tracked: u32,
    /// Absent when the class has no true instances.
    pub error: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub version: u32,
    pub car: ClassReport,
    pub pedestrian: ClassReport,
}

pub fn evaluate(gt: &GroundTruth, counts: &ClassCounter) -> EvalReport {
    let class_report = |class: Class| {
        let n_true = gt.count(class);
        let n_tracked = counts.get(class);
        ClassReport {
            n_true,
            n_tracked,
            error: eval_error(n_true, n_tracked).ok(),
        }
    };
    EvalReport {
        version: 1,
        car: class_report(Class::Car),
        pedestrian: class_report(Class::Pedestrian),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_error_values() {
        assert_eq!(eval_error(4, 4).unwrap(), 0.0);
        assert_eq!(eval_error(6, 5).unwrap(), 1.0 / 6.0);
        assert_eq!(eval_error(2, 3).unwrap(), -0.5);
        assert_eq!(eval_error(3, 0).unwrap(), 1.0);
    }

    #[test]
    fn zero_truth_is_an_error() {
        assert!(matches!(eval_error(0, 0), Err(Error::ZeroTruth)));
        assert!(matches!(eval_error(0, 5), Err(Error::ZeroTruth)));
    }

    #[test]
    fn report_shape_and_missing_error() {
        let gt = GroundTruth { car: 2, pedestrian: 0 };
        let mut counts = ClassCounter::default();
        counts.inc(Class::Car);
        counts.inc(Class::Car);
        counts.inc(Class::Car);
        let report = evaluate(&gt, &counts);
        assert_eq!(report.car.error, Some(-0.5));
        assert_eq!(report.pedestrian.error, None);
        let json = serde_json::to_string(&report).unwrap();
        assert!(json.contains("\"error\":null"));
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn ground_truth_rejects_unknown_fields() {
        let r: std::result::Result<GroundTruth, _> =
            serde_json::from_str(r#"{"car": 1, "pedestrian": 2, "bike": 3}"#);
        assert!(r.is_err());
    }

    proptest! {
        #[test]
        fn error_sign_tracks_count_difference(n_true in 1u32..500, n_tracked in 0u32..500) {
            let e = eval_error(n_true, n_tracked).unwrap();
            if n_tracked == n_true {
                prop_assert_eq!(e, 0.0);
            } else if n_tracked < n_true {
                prop_assert!(e > 0.0 && e <= 1.0);
            } else {
                prop_assert!(e < 0.0);
            }
        }

        #[test]
        fn perfect_tracking_means_zero(n in 1u32..1000) {
            prop_assert_eq!(eval_error(n, n).unwrap(), 0.0);
        }
    }
}
