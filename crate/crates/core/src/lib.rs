//! Smart vision sensor pipeline: motion-gated frame delivery, projection
//! based region proposal, linear classification and track-level counting,
//! with per-stage operation accounting throughout.
//!
//! The flow mirrors a low-power sensing device. A sensor front end keeps a
//! running background, erodes the motion mask and watches the mask's row
//! and column projections; when both projections carry a long enough run,
//! it wakes up and delivers a burst of frames. Delivered frames are turned
//! into candidate boxes straight from the projection runs, each candidate
//! is kept only if it holds enough hot pixels, kept boxes are classified
//! from four shape features, and a constant-velocity tracker with an
//! overlap-based assignment counts objects per class once per track.
//!
//! Everything is deterministic: seeded generators, fixed iteration orders
//! and integer geometry throughout, so identical inputs produce identical
//! event logs, reports and artifacts.

// Grid and matrix code here indexes by row and column on purpose.
#![allow(clippy::needless_range_loop)]

pub mod bitmap;
pub mod dataset;
pub mod detect;
pub mod error;
pub mod eval;
pub mod explain;
pub mod geometry;
pub mod hungarian;
pub mod kalman;
pub mod netpbm;
pub mod opcount;
pub mod pipeline;
pub mod sensor;
pub mod svm;
pub mod synth;
pub mod track;

pub use bitmap::{MotionBitmap, ProjectionPair, QQVGA_COLS, QQVGA_ROWS};
pub use error::{Error, Result};
pub use eval::{eval_error, evaluate, EvalReport, GroundTruth};
pub use geometry::{iou, BoundingBox};
pub use pipeline::{load_sequence, run_pipeline, PipelineConfig, RunOutput};
pub use sensor::{GrayFrame, SensorConfig, SensorEvent, SensorState};
pub use svm::{svm_train, Class, FeatureVec, SvmModel, TrainParams};
pub use track::{ClassCounter, Detection, TrackEvent, Tracker, TrackerConfig};
