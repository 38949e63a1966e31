//! Constant-velocity Kalman filter over `(cx, cy, aspect, height)`.
//!
//! Process and measurement noise scale with the box height, so the filter
//! behaves the same for near and far objects.

use nalgebra::{SMatrix, SVector};

use crate::geometry::BBox;

pub type StateVector = SVector<f64, 8>;
pub type StateCovariance = SMatrix<f64, 8, 8>;
type Measurement = SVector<f64, 4>;

const STD_WEIGHT_POSITION: f64 = 1.0 / 20.0;
const STD_WEIGHT_VELOCITY: f64 = 1.0 / 160.0;
const MIN_SIZE: f64 = 1e-3;

/// Mean and covariance of one track's state.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub mean: StateVector,
    pub covariance: StateCovariance,
}

impl KalmanState {
    /// Box at the state mean. Aspect and height are floored at a small
    /// positive value so a long coast cannot produce a degenerate box.
    pub fn bbox(&self) -> BBox {
        let m = &self.mean;
        let h = m[3].max(MIN_SIZE);
        let a = m[2].max(MIN_SIZE);
        BBox::from_center_aspect(m[0], m[1], a, h).expect("state mean is finite")
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.mean[4], self.mean[5])
    }
}

#[derive(Debug, Clone)]
pub struct KalmanFilter {
    motion: StateCovariance,
    update: SMatrix<f64, 4, 8>,
}

impl Default for KalmanFilter {
    fn default() -> Self {
        Self::new()
    }
}

fn measure(b: &BBox) -> Measurement {
    let (cx, cy) = b.center();
    Measurement::new(cx, cy, b.aspect(), b.h())
}

impl KalmanFilter {
    pub fn new() -> Self {
        let mut motion = StateCovariance::identity();
        for i in 0..4 {
            motion[(i, i + 4)] = 1.0;
        }
        let mut update = SMatrix::<f64, 4, 8>::zeros();
        for i in 0..4 {
            update[(i, i)] = 1.0;
        }
        KalmanFilter { motion, update }
    }

    pub fn transition(&self) -> &StateCovariance {
        &self.motion
    }

    /// New state at `b` with zero velocity.
    pub fn initiate(&self, b: &BBox) -> KalmanState {
        let z = measure(b);
        let h = z[3];
        let mut mean = StateVector::zeros();
        mean.fixed_rows_mut::<4>(0).copy_from(&z);
        let std = StateVector::from([
            2.0 * STD_WEIGHT_POSITION * h,
            2.0 * STD_WEIGHT_POSITION * h,
            1e-2,
            2.0 * STD_WEIGHT_POSITION * h,
            10.0 * STD_WEIGHT_VELOCITY * h,
            10.0 * STD_WEIGHT_VELOCITY * h,
            1e-5,
            10.0 * STD_WEIGHT_VELOCITY * h,
        ]);
        KalmanState { mean, covariance: StateCovariance::from_diagonal(&std.component_mul(&std)) }
    }

    /// Advance one frame: `x' = F x`, `P' = F P Fᵀ + Q`.
    pub fn predict(&self, state: &KalmanState) -> KalmanState {
        let h = state.mean[3].max(MIN_SIZE);
        let std = StateVector::from([
            STD_WEIGHT_POSITION * h,
            STD_WEIGHT_POSITION * h,
            1e-2,
            STD_WEIGHT_POSITION * h,
            STD_WEIGHT_VELOCITY * h,
            STD_WEIGHT_VELOCITY * h,
            1e-5,
            STD_WEIGHT_VELOCITY * h,
        ]);
        let q = StateCovariance::from_diagonal(&std.component_mul(&std));
        let mean = self.motion * state.mean;
        let covariance = self.motion * state.covariance * self.motion.transpose() + q;
        KalmanState { mean, covariance: symmetrize(covariance) }
    }

    /// Correct the state with an observed box.
    pub fn update(&self, state: &KalmanState, observed: &BBox) -> KalmanState {
        let h = state.mean[3].max(MIN_SIZE);
        let std = Measurement::new(STD_WEIGHT_POSITION * h, STD_WEIGHT_POSITION * h, 1e-1, STD_WEIGHT_POSITION * h);
        let r = SMatrix::<f64, 4, 4>::from_diagonal(&std.component_mul(&std));
        let projected = self.update * state.mean;
        let s = self.update * state.covariance * self.update.transpose() + r;
        let pht = state.covariance * self.update.transpose();
        // K = P Hᵀ S⁻¹, solved as S Kᵀ = H P
        let gain_t = match s.cholesky() {
            Some(chol) => chol.solve(&pht.transpose()),
            None => s.try_inverse().expect("innovation covariance is positive definite") * pht.transpose(),
        };
        let gain = gain_t.transpose();
        let innovation = measure(observed) - projected;
        let mut mean = state.mean + gain * innovation;
        mean[3] = mean[3].max(MIN_SIZE);
        let covariance = state.covariance - gain * s * gain.transpose();
        KalmanState { mean, covariance: symmetrize(covariance) }
    }
}

fn symmetrize(m: StateCovariance) -> StateCovariance {
    (m + m.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bbox(x: f64, y: f64, w: f64, h: f64) -> BBox {
        BBox::new(x, y, w, h).unwrap()
    }

    #[test]
    fn stationary_state_is_a_fixed_point() {
        let kf = KalmanFilter::new();
        let b = bbox(40.0, 20.0, 60.0, 30.0);
        let s = kf.initiate(&b);
        let p = kf.predict(&s).bbox();
        for (u, v) in <[f64; 4]>::from(p).iter().zip(<[f64; 4]>::from(b).iter()) {
            assert!((u - v).abs() < 1e-9);
        }
    }

    #[test]
    fn velocity_propagates_linearly() {
        let kf = KalmanFilter::new();
        let mut s = kf.initiate(&bbox(70.0, 35.0, 60.0, 30.0));
        s.mean[4] = 5.0;
        let p = kf.predict(&s);
        assert!((p.mean[0] - 105.0).abs() < 1e-12);
        assert!((p.mean[1] - 50.0).abs() < 1e-12);
    }

    #[test]
    fn two_predictions_match_squared_transition() {
        let kf = KalmanFilter::new();
        let mut s = kf.initiate(&bbox(10.0, 10.0, 40.0, 20.0));
        s.mean[4] = 3.0;
        s.mean[5] = -1.5;
        s.mean[7] = 0.25;
        let twice = kf.predict(&kf.predict(&s));
        let f = kf.transition();
        let oracle = f * f * s.mean;
        assert!((twice.mean - oracle).norm() < 1e-12);
        // equivalently one step with the velocity doubled
        let mut doubled = s.clone();
        for i in 4..8 {
            doubled.mean[i] *= 2.0;
        }
        let once = kf.predict(&doubled);
        for i in 0..4 {
            assert!((once.mean[i] - twice.mean[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn update_moves_towards_measurement_and_keeps_covariance_psd() {
        let kf = KalmanFilter::new();
        let s = kf.predict(&kf.initiate(&bbox(0.0, 0.0, 40.0, 20.0)));
        let u = kf.update(&s, &bbox(6.0, 0.0, 40.0, 20.0));
        assert!(u.mean[0] > 20.0 && u.mean[0] < 26.0);
        assert!(u.mean[4] > 0.0);
        let c = &u.covariance;
        assert!((c - c.transpose()).norm() < 1e-12);
        let eig = c.symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e > -1e-9), "{eig:?}");
    }
}
