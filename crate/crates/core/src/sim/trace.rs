//! Per-tick and per-replan records of a run, and their summary.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;
use serde::{Deserialize, Serialize};

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TraceRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    pub a: f64,
    pub delta: f64,
    pub u: f64,
    /// Front-axle error against the tracked (planned) path.
    pub e_fa: f64,
    pub theta_e: f64,
    /// Front-axle station and lateral offset against the reference line.
    pub station: f64,
    pub offset: f64,
    /// Gap error to the ACC target (0 when cruising).
    pub d_error: f64,
    pub d_error_est: f64,
    pub v_rel: f64,
    /// Smallest footprint-circle gap to any obstacle at this tick.
    pub clearance: f64,
    /// Index of the replan whose trajectory is tracked, -1 before the first.
    pub plan: i64,
    /// Obstacle used as ACC target, -1 when cruising.
    pub lead: i64,
    pub emergency: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReplanStatus {
    Selected,
    NoFeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplanRow {
    pub t: f64,
    pub index: usize,
    pub start_station: f64,
    pub start_offset: f64,
    pub candidates: usize,
    pub checked: usize,
    pub status: ReplanStatus,
    /// Selected end state (NaN without a selection).
    pub end_offset: f64,
    pub end_length: f64,
    pub cost: f64,
    pub clearance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Duration,
    RoadEnd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub dt: f64,
    pub rows: Vec<TraceRow>,
    pub replans: Vec<ReplanRow>,
    pub end: EndReason,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub ticks: usize,
    pub duration: f64,
    pub max_tracking_error: f64,
    pub rms_tracking_error: f64,
    pub max_lateral_offset: f64,
    pub max_lateral_accel: f64,
    pub max_jerk: f64,
    pub min_clearance: f64,
    pub mean_abs_d_error: f64,
    pub replan_count: usize,
    pub mean_checked_per_replan: f64,
    pub max_checked_per_replan: usize,
    pub emergency_ticks: usize,
}

/// Summary of `trace` for a vehicle with `wheelbase`. Lateral acceleration
/// is `v^2 tan(delta) / wheelbase`; jerk differences the recorded `a`.
pub fn metrics(trace: &Trace, wheelbase: f64) -> Result<Metrics, SimError> {
    let rows = &trace.rows;
    if rows.is_empty() {
        return Err(SimError::EmptyTrace);
    }
    let n = rows.len() as f64;
    let max_abs = |f: &dyn Fn(&TraceRow) -> f64| rows.iter().map(|r| f(r).abs()).fold(0.0, f64::max);
    let max_jerk = rows.windows(2).map(|w| ((w[1].a - w[0].a) / trace.dt).abs()).fold(0.0, f64::max);
    let checked: Vec<usize> = trace.replans.iter().map(|r| r.checked).collect();
    Ok(Metrics {
        ticks: rows.len(),
        duration: rows[rows.len() - 1].t - rows[0].t,
        max_tracking_error: max_abs(&|r| r.e_fa),
        rms_tracking_error: (rows.iter().map(|r| r.e_fa * r.e_fa).sum::<f64>() / n).sqrt(),
        max_lateral_offset: max_abs(&|r| r.offset),
        max_lateral_accel: max_abs(&|r| r.v * r.v * r.delta.tan() / wheelbase),
        max_jerk,
        min_clearance: rows.iter().map(|r| r.clearance).fold(f64::INFINITY, f64::min),
        mean_abs_d_error: rows.iter().map(|r| r.d_error.abs()).sum::<f64>() / n,
        replan_count: trace.replans.len(),
        mean_checked_per_replan: if checked.is_empty() {
            0.0
        } else {
            checked.iter().sum::<usize>() as f64 / checked.len() as f64
        },
        max_checked_per_replan: checked.iter().copied().max().unwrap_or(0),
        emergency_ticks: rows.iter().filter(|r| r.emergency).count(),
    })
}
