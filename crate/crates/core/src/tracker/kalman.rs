//! Constant-velocity Kalman filter on box center and size.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};
use crate::geometry::BBox;

type Vec8 = SVector<f64, 8>;
type Mat8 = SMatrix<f64, 8, 8>;
type Vec4 = SVector<f64, 4>;
type Mat4 = SMatrix<f64, 4, 4>;
type Mat48 = SMatrix<f64, 4, 8>;

/// Position noise per step as a fraction of the box height.
pub const SIGMA_POS: f64 = 1.0 / 20.0;
/// Velocity noise per step as a fraction of the box height.
pub const SIGMA_VEL: f64 = 1.0 / 160.0;
/// Smallest width or height an emitted box may have.
const MIN_SIZE: f64 = 1e-3;

/// State `(cx, cy, w, h, vcx, vcy, vw, vh)` with its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: Vec8,
    pub covariance: Mat8,
}

fn sq(v: f64) -> f64 {
    v * v
}

fn observation() -> Mat48 {
    Mat48::identity()
}

impl KalmanState {
    /// Zero velocity, with wide velocity uncertainty.
    pub fn new(b: &BBox) -> Self {
        let (cx, cy) = b.center();
        let h = b.height;
        let mean = Vec8::from_column_slice(&[cx, cy, b.width, h, 0.0, 0.0, 0.0, 0.0]);
        let mut covariance = Mat8::zeros();
        for i in 0..4 {
            covariance[(i, i)] = sq(2.0 * SIGMA_POS * h);
            covariance[(i + 4, i + 4)] = sq(10.0 * SIGMA_VEL * h);
        }
        Self { mean, covariance }
    }

    pub fn bbox(&self) -> BBox {
        let m = &self.mean;
        BBox::from_center(m[0], m[1], m[2].max(MIN_SIZE), m[3].max(MIN_SIZE))
    }

    fn size_scale(&self) -> f64 {
        self.mean[3].abs().max(MIN_SIZE)
    }

    /// One constant-velocity step. Returns the predicted box.
    pub fn predict(&mut self) -> BBox {
        let mut f = Mat8::identity();
        for i in 0..4 {
            f[(i, i + 4)] = 1.0;
        }
        let h = self.size_scale();
        let mut q = Mat8::zeros();
        for i in 0..4 {
            q[(i, i)] = sq(SIGMA_POS * h);
            q[(i + 4, i + 4)] = sq(SIGMA_VEL * h);
        }
        self.mean = f * self.mean;
        self.covariance = f * self.covariance * f.transpose() + q;
        self.symmetrize();
        self.bbox()
    }

    /// Standard correction with a box measurement.
    pub fn update(&mut self, b: &BBox) -> Result<()> {
        if !b.is_finite() {
            return Err(Error::NonFinite("kalman measurement"));
        }
        let (cx, cy) = b.center();
        let z = Vec4::new(cx, cy, b.width, b.height);
        let hm = observation();
        let s_r = sq(SIGMA_POS * self.size_scale());
        let s = hm * self.covariance * hm.transpose() + Mat4::identity() * s_r;
        let chol = s.cholesky().ok_or(Error::Singular("kalman innovation covariance"))?;
        // K = P H^T S^-1, computed as (S^-1 H P)^T since S and P are symmetric.
        let k = chol.solve(&(hm * self.covariance)).transpose();
        let innovation = z - hm * self.mean;
        self.mean += k * innovation;
        self.covariance = (Mat8::identity() - k * hm) * self.covariance;
        self.symmetrize();
        if !self.mean.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("kalman state"));
        }
        Ok(())
    }

    fn symmetrize(&mut self) {
        self.covariance = (self.covariance + self.covariance.transpose()) * 0.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_motion() {
        let mut k = KalmanState::new(&BBox::from_center(10.0, 5.0, 4.0, 8.0));
        k.mean[4] = 2.0;
        let b = k.predict();
        assert!((b.center().0 - 12.0).abs() < 1e-12);
        assert!((b.center().1 - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_velocity_keeps_box() {
        let b0 = BBox::new(3.0, 4.0, 10.0, 20.0);
        let mut k = KalmanState::new(&b0);
        let b = k.predict();
        for (a, c) in [(b.left, b0.left), (b.top, b0.top), (b.width, b0.width), (b.height, b0.height)] {
            assert!((a - c).abs() < 1e-12);
        }
    }

    #[test]
    fn predict_grows_trace() {
        let mut k = KalmanState::new(&BBox::new(0.0, 0.0, 10.0, 20.0));
        for _ in 0..20 {
            let before = k.covariance.trace();
            k.predict();
            assert!(k.covariance.trace() > before);
        }
    }

    #[test]
    fn update_at_prediction_keeps_mean_and_shrinks() {
        let mut k = KalmanState::new(&BBox::new(0.0, 0.0, 10.0, 20.0));
        k.mean[4] = 1.5;
        let pred = k.predict();
        let mean = k.mean;
        let trace = k.covariance.trace();
        k.update(&pred).unwrap();
        assert!((k.mean - mean).abs().max() < 1e-9);
        assert!(k.covariance.trace() < trace);
        assert_eq!(k.covariance, k.covariance.transpose());
    }

    #[test]
    fn repeated_observation_converges() {
        let target = BBox::new(50.0, 60.0, 12.0, 30.0);
        let mut k = KalmanState::new(&BBox::new(42.0, 55.0, 10.0, 27.0));
        for _ in 0..50 {
            k.predict();
            k.update(&target).unwrap();
            assert_eq!(k.covariance, k.covariance.transpose());
        }
        let b = k.bbox();
        for (a, c) in [(b.left, target.left), (b.top, target.top), (b.width, target.width), (b.height, target.height)] {
            assert!((a - c).abs() < 1e-3, "{a} vs {c}");
        }
    }

    #[test]
    fn non_finite_measurement_rejected() {
        let mut k = KalmanState::new(&BBox::new(0.0, 0.0, 10.0, 20.0));
        assert!(k.update(&BBox::new(f64::NAN, 0.0, 1.0, 1.0)).is_err());
    }
}
