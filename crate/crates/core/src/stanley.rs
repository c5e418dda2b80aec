//! Stanley steering with speed-scheduled gain and look-ahead divisor.

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::geometry::{wrap_angle, GeometryError, Point2, ReferenceLine, DEFAULT_PROJECTION_HORIZON};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StanleyError {
    #[error("speed must be non-negative, got {speed}")]
    NegativeSpeed { speed: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StanleyMode {
    /// `atan(k_e(v) e / L_x(v))`.
    #[default]
    Modified,
    /// `atan(k_e e / v)` with the gain at `v`.
    Classic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StanleySchedule {
    pub lx_low: f64,
    pub lx_slope: f64,
    pub lx_high: f64,
    pub v_break1: f64,
    pub v_break2: f64,
    pub ke_intercept: f64,
    pub ke_slope: f64,
    pub ke_high: f64,
    pub delta_max: f64,
    pub mode: StanleyMode,
}

impl Default for StanleySchedule {
    fn default() -> Self {
        Self {
            lx_low: 10.0,
            lx_slope: 0.8,
            lx_high: 20.0,
            v_break1: 12.5,
            v_break2: 25.0,
            ke_intercept: 0.5,
            ke_slope: 0.02,
            ke_high: 1.0,
            delta_max: 0.6,
            mode: StanleyMode::Modified,
        }
    }
}

fn check_speed(v: f64) -> Result<(), StanleyError> {
    if v >= 0.0 {
        Ok(())
    } else {
        Err(StanleyError::NegativeSpeed { speed: v })
    }
}

/// Look-ahead divisor: `lx_low` below `v_break1`, `lx_slope * v` up to
/// `v_break2`, then `lx_high`.
pub fn lookup_lx(v: f64, sched: &StanleySchedule) -> Result<f64, StanleyError> {
    check_speed(v)?;
    Ok(if v < sched.v_break1 {
        sched.lx_low
    } else if v < sched.v_break2 {
        sched.lx_slope * v
    } else {
        sched.lx_high
    })
}

/// Cross-track gain: `ke_intercept + ke_slope * v` below `v_break2`, then
/// `ke_high`.
pub fn lookup_ke(v: f64, sched: &StanleySchedule) -> Result<f64, StanleyError> {
    check_speed(v)?;
    Ok(if v < sched.v_break2 {
        sched.ke_intercept + sched.ke_slope * v
    } else {
        sched.ke_high
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrackingError {
    /// Signed front-axle offset from the path, left positive.
    pub e_fa: f64,
    /// Path heading minus vehicle heading, wrapped.
    pub theta_e: f64,
}

/// Errors of a vehicle whose rear axle is at `rear` with `heading`.
pub fn compute_errors(rear: Point2, heading: f64, line: &ReferenceLine, wheelbase: f64) -> Result<TrackingError, StanleyError> {
    let front = rear + Point2::from_angle(heading) * wheelbase;
    let f = line.project(front, DEFAULT_PROJECTION_HORIZON)?;
    let path_heading = line.sample(f.l)?.heading;
    Ok(TrackingError {
        e_fa: f.d,
        theta_e: wrap_angle(path_heading - heading),
    })
}

/// Unclamped steering angle. A vehicle left of the path (`e_fa > 0`) is
/// steered right.
pub fn steer_unclamped(err: &TrackingError, v: f64, sched: &StanleySchedule) -> Result<f64, StanleyError> {
    let ke = lookup_ke(v, sched)?;
    let correction = match sched.mode {
        StanleyMode::Modified => (ke * err.e_fa / lookup_lx(v, sched)?).atan(),
        StanleyMode::Classic => {
            if err.e_fa == 0.0 {
                0.0
            } else {
                // atan(x / 0) is +-pi/2, which is the classic law's limit.
                (ke * err.e_fa).atan2(v)
            }
        }
    };
    Ok(err.theta_e - correction)
}

pub fn steer(err: &TrackingError, v: f64, sched: &StanleySchedule) -> Result<f64, StanleyError> {
    Ok(steer_unclamped(err, v, sched)?.clamp(-sched.delta_max, sched.delta_max))
}
