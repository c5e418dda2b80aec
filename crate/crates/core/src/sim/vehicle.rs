//! Kinematic bicycle with a first-order acceleration lag.

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::geometry::{wrap_angle, Point2};

use super::SimError;

/// Rear-axle pose and longitudinal state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    /// Actual acceleration, after the lag.
    pub a: f64,
}

impl VehicleState {
    pub fn rear(&self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn front(&self, wheelbase: f64) -> Point2 {
        self.rear() + Point2::from_angle(self.heading) * wheelbase
    }
}

/// One explicit step. The acceleration first relaxes exactly towards
/// `k_l * a_cmd`; position and heading then advance with the old speed and
/// the speed with the new acceleration.
pub fn bicycle_step(s: &VehicleState, delta: f64, a_cmd: f64, dt: f64, wheelbase: f64, t_l: f64, k_l: f64) -> Result<VehicleState, SimError> {
    if !(dt > 0.0 && dt <= 0.1) {
        return Err(SimError::InvalidStep("dt must lie in (0, 0.1] s"));
    }
    if !(delta.abs() <= core::f64::consts::FRAC_PI_2 - 1e-6) {
        return Err(SimError::InvalidStep("steering angle too close to pi/2"));
    }
    if !(wheelbase > 0.0 && t_l > 0.0) {
        return Err(SimError::InvalidStep("wheelbase and lag time must be positive"));
    }
    let target = k_l * a_cmd;
    let a = target + (s.a - target) * (-dt / t_l).exp();
    Ok(VehicleState {
        x: s.x + s.v * s.heading.cos() * dt,
        y: s.y + s.v * s.heading.sin() * dt,
        heading: wrap_angle(s.heading + s.v / wheelbase * delta.tan() * dt),
        v: (s.v + a * dt).max(0.0),
        a,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn straight_advance() {
        let s = VehicleState {
            v: 3.0,
            ..Default::default()
        };
        let n = bicycle_step(&s, 0.0, 0.0, 0.05, 2.8, 0.5, 1.0).unwrap();
        assert!((n.x - 0.15).abs() < 1e-15 && n.y == 0.0 && n.v == 3.0);
    }

    #[test]
    fn lag_response() {
        let mut s = VehicleState::default();
        let dt = 0.001;
        for k in 1..=2000 {
            s = bicycle_step(&s, 0.0, 1.0, dt, 2.8, 0.5, 1.0).unwrap();
            let t = k as f64 * dt;
            assert!((s.a - (1.0 - (-t / 0.5).exp())).abs() < 1e-3);
        }
    }

    #[test]
    fn speed_never_negative() {
        let s = VehicleState {
            v: 0.01,
            a: -5.0,
            ..Default::default()
        };
        assert_eq!(bicycle_step(&s, 0.0, -5.0, 0.1, 2.8, 0.5, 1.0).unwrap().v, 0.0);
    }

    #[test]
    fn invalid_steps() {
        let s = VehicleState::default();
        assert!(bicycle_step(&s, 0.0, 0.0, 0.2, 2.8, 0.5, 1.0).is_err());
        assert!(bicycle_step(&s, 0.0, 0.0, 0.0, 2.8, 0.5, 1.0).is_err());
        assert!(bicycle_step(&s, 1.6, 0.0, 0.01, 2.8, 0.5, 1.0).is_err());
    }
}
