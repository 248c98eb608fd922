//! Constant-velocity Kalman filter over box center, size, and velocity.
//!
//! State is `(cx, cy, w, h, vx, vy)`: the center moves with constant
//! velocity, width and height are modeled constant. Measurements are whole
//! boxes. The update uses the Joseph form and handles an exactly singular
//! innovation covariance (the zero-noise case collapses to one) through a
//! pseudo-inverse, so noise-free tracking stays finite and exact.

use crate::geometry::BoundingBox;
use nalgebra::{Cholesky, SMatrix, SVector};

type V6 = SVector<f64, 6>;
type M6 = SMatrix<f64, 6, 6>;
type V4 = SVector<f64, 4>;
type M4 = SMatrix<f64, 4, 4>;
type M46 = SMatrix<f64, 4, 6>;

/// Noise scales of the filter. `q_*` is process noise (position/size vs
/// velocity), `r_pos` measurement noise, `init_vel_var` the initial
/// velocity variance expressing that a fresh track's speed is unknown.
#[derive(Debug, Clone, Copy)]
pub struct KalmanParams {
    pub q_pos: f64,
    pub q_vel: f64,
    pub r_pos: f64,
    pub init_vel_var: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        KalmanParams {
            q_pos: 1.0,
            q_vel: 0.01,
            r_pos: 1.0,
            init_vel_var: 1000.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KalmanState {
    mean: V6,
    cov: M6,
    /// Frame index of the most recent measurement folded in.
    pub last_update_frame: u64,
}

fn transition() -> M6 {
    let mut f = M6::identity();
    f[(0, 4)] = 1.0;
    f[(1, 5)] = 1.0;
    f
}

fn observation() -> M46 {
    let mut h = M46::zeros();
    for i in 0..4 {
        h[(i, i)] = 1.0;
    }
    h
}

/// Box center and size as a measurement vector.
pub fn measure(b: &BoundingBox) -> [f64; 4] {
    let (cx, cy) = b.center();
    [cx, cy, b.width() as f64, b.height() as f64]
}

/// Rebuild an integer box from a state's center and size. Width and height
/// are clamped to at least one pixel; integer-valued states round-trip
/// exactly.
pub fn box_from_state(cx: f64, cy: f64, w: f64, h: f64) -> BoundingBox {
    let wr = w.round().max(1.0) as i64;
    let hr = h.round().max(1.0) as i64;
    let x0 = (cx - (wr - 1) as f64 / 2.0).round() as i32;
    let y0 = (cy - (hr - 1) as f64 / 2.0).round() as i32;
    BoundingBox::new(x0, y0, x0 + wr as i32 - 1, y0 + hr as i32 - 1)
}

impl KalmanState {
    /// Start a track from its first box. The box is a measurement, so the
    /// observed components start at the measurement variance; the velocity
    /// starts at zero with a large variance.
    pub fn init(b: &BoundingBox, p: &KalmanParams, frame: u64) -> Self {
        let z = measure(b);
        let mean = V6::from([z[0], z[1], z[2], z[3], 0.0, 0.0]);
        let cov = M6::from_diagonal(&V6::from([
            p.r_pos,
            p.r_pos,
            p.r_pos,
            p.r_pos,
            p.init_vel_var,
            p.init_vel_var,
        ]));
        KalmanState {
            mean,
            cov,
            last_update_frame: frame,
        }
    }

    /// Advance one frame and return the predicted box.
    pub fn predict(&mut self, p: &KalmanParams) -> BoundingBox {
        let f = transition();
        self.mean = f * self.mean;
        let q = M6::from_diagonal(&V6::from([
            p.q_pos, p.q_pos, p.q_pos, p.q_pos, p.q_vel, p.q_vel,
        ]));
        self.cov = f * self.cov * f.transpose() + q;
        self.cov = (self.cov + self.cov.transpose()) * 0.5;
        self.predicted_box()
    }

    /// Fold in a measured box.
    pub fn update(&mut self, b: &BoundingBox, p: &KalmanParams, frame: u64) {
        let h = observation();
        let z = V4::from(measure(b));
        let r = M4::from_diagonal(&V4::from([p.r_pos, p.r_pos, p.r_pos, p.r_pos]));
        let s = h * self.cov * h.transpose() + r;
        // K = P H^T S^{-1}. Cholesky when S is positive definite; otherwise
        // (converged zero-noise case) the pseudo-inverse, which degrades to
        // a zero gain exactly when no information is left to extract.
        let k = match Cholesky::new(s) {
            Some(chol) => chol.solve(&(h * self.cov)).transpose(),
            None => {
                let pinv = s
                    .svd(true, true)
                    .pseudo_inverse(1e-12)
                    .expect("svd of a 4x4 always yields a pseudo-inverse");
                self.cov * h.transpose() * pinv
            }
        };
        let innovation = z - h * self.mean;
        self.mean += k * innovation;
        let a = M6::identity() - k * h;
        self.cov = a * self.cov * a.transpose() + k * r * k.transpose();
        self.cov = (self.cov + self.cov.transpose()) * 0.5;
        self.last_update_frame = frame;
    }

    /// Current `(cx, cy, w, h, vx, vy)`.
    pub fn state(&self) -> [f64; 6] {
        self.mean.into()
    }

    pub fn predicted_box(&self) -> BoundingBox {
        box_from_state(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }

    pub fn covariance(&self) -> [[f64; 6]; 6] {
        let mut out = [[0.0; 6]; 6];
        for r in 0..6 {
            for c in 0..6 {
                out[r][c] = self.cov[(r, c)];
            }
        }
        out
    }

    /// Smallest eigenvalue of the covariance (PSD check in tests).
    pub fn min_cov_eigenvalue(&self) -> f64 {
        self.cov
            .symmetric_eigenvalues()
            .iter()
            .fold(f64::INFINITY, |a, &b| a.min(b))
    }
}
