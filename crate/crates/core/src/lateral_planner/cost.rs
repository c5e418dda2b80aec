//! Candidate sampling along the reference line and the weighted cost sum.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::geometry::{frenet_to_cartesian, FrenetState, PathPoint, ReferenceLine};

use super::quintic::{solve_quintic, QuinticPolynomial};
use super::PlannerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostWeights {
    pub w_s: f64,
    pub w_k: f64,
    pub w_kdot: f64,
    pub w_kddot: f64,
    pub w_kdddot: f64,
    pub w_dcenter: f64,
    pub w_alat: f64,
    pub w_alon: f64,
    pub w_alatdot: f64,
    pub w_alondot: f64,
    pub w_l: f64,
    pub w_t: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            w_s: 1.0,
            w_k: 1.0,
            w_kdot: 1.0,
            w_kddot: 1.0,
            w_kdddot: 1.0,
            w_dcenter: 1.0,
            w_alat: 1.0,
            w_alon: 1.0,
            w_alatdot: 1.0,
            w_alondot: 1.0,
            w_l: 0.5,
            w_t: 0.1,
        }
    }
}

impl CostWeights {
    fn as_array(&self) -> [f64; 12] {
        [
            self.w_s,
            self.w_k,
            self.w_kdot,
            self.w_kddot,
            self.w_kdddot,
            self.w_dcenter,
            self.w_alat,
            self.w_alon,
            self.w_alatdot,
            self.w_alondot,
            self.w_l,
            self.w_t,
        ]
    }

    pub fn validate(&self) -> Result<(), PlannerError> {
        let w = self.as_array();
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) || w.iter().all(|x| *x == 0.0) {
            return Err(PlannerError::InvalidWeights);
        }
        Ok(())
    }
}

/// One point of a sampled candidate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TrajectorySample {
    /// Cartesian pose; `point.s` is arc length along the candidate.
    pub point: PathPoint,
    /// Frenet coordinates against the reference line.
    pub l: f64,
    pub d: f64,
    pub kappa_dot: f64,
    pub kappa_ddot: f64,
    pub kappa_dddot: f64,
    pub a_lat: f64,
    pub a_lon: f64,
    pub a_lat_dot: f64,
    pub a_lon_dot: f64,
    /// Length of the section ending here (0 at the first sample).
    pub ds: f64,
    /// Time since the start of the candidate.
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateTrajectory {
    pub poly: QuinticPolynomial,
    pub end_state: FrenetState,
    pub samples: Vec<TrajectorySample>,
    /// Speed assumed along the candidate.
    pub speed: f64,
    pub cost: f64,
    pub collision_checked: bool,
    pub feasible: bool,
    /// Smallest circle-to-obstacle gap found by the collision check.
    pub clearance: f64,
}

impl CandidateTrajectory {
    pub fn duration(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }

    /// Lateral offset of the candidate at station `l`, clamped to its span.
    pub fn offset_at(&self, l: f64) -> f64 {
        self.poly.eval(l.clamp(self.poly.l0, self.poly.le), 0)
    }
}

/// Derivative of `v` with respect to `s` on a non-uniform grid: central
/// differences inside, one-sided at the ends.
fn gradient(v: &[f64], s: &[f64]) -> Vec<f64> {
    let n = v.len();
    let slope = |i: usize, j: usize| {
        let h = s[j] - s[i];
        if h > 0.0 {
            (v[j] - v[i]) / h
        } else {
            0.0
        }
    };
    (0..n)
        .map(|i| match i {
            0 => slope(0, 1),
            _ if i == n - 1 => slope(n - 2, n - 1),
            _ => slope(i - 1, i + 1),
        })
        .collect()
}

/// Stations `l0, l0 + step, ...` up to and including `le`.
pub fn sample_stations(l0: f64, le: f64, step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let l = l0 + k as f64 * step;
        if l >= le - 1e-9 {
            break;
        }
        out.push(l);
        k += 1;
    }
    out.push(le);
    out
}

/// Solves the quintic from `c0` to `ce` and maps it onto `reference` every
/// `step` metres of station, at constant `speed`. The cost is left at 0.
pub fn build_candidate(
    c0: &FrenetState,
    ce: &FrenetState,
    reference: &ReferenceLine,
    speed: f64,
    step: f64,
) -> Result<CandidateTrajectory, PlannerError> {
    if !(speed > 0.0) {
        return Err(PlannerError::NonpositiveSpeed { speed });
    }
    let poly = solve_quintic(c0, ce)?;
    let stations = sample_stations(c0.l, ce.l, step);
    if stations.len() < 2 {
        return Err(PlannerError::TooFewSamples { got: stations.len() });
    }
    let mut samples = Vec::with_capacity(stations.len());
    let mut s = 0.0;
    for &l in &stations {
        let f = poly.state(l);
        let mut point = frenet_to_cartesian(reference, &f)?;
        let ds = samples
            .last()
            .map_or(0.0, |prev: &TrajectorySample| prev.point.position.distance(point.position));
        s += ds;
        point.s = s;
        samples.push(TrajectorySample {
            point,
            l,
            d: f.d,
            ds,
            t: s / speed,
            ..Default::default()
        });
    }
    let arc: Vec<f64> = samples.iter().map(|p| p.point.s).collect();
    let kappa: Vec<f64> = samples.iter().map(|p| p.point.curvature).collect();
    let k1 = gradient(&kappa, &arc);
    let k2 = gradient(&k1, &arc);
    let k3 = gradient(&k2, &arc);
    let a_lat: Vec<f64> = kappa.iter().map(|k| speed * speed * k).collect();
    let a_lat_dot = gradient(&a_lat, &arc);
    for (i, p) in samples.iter_mut().enumerate() {
        p.kappa_dot = k1[i];
        p.kappa_ddot = k2[i];
        p.kappa_dddot = k3[i];
        p.a_lat = a_lat[i];
        p.a_lat_dot = speed * a_lat_dot[i];
    }
    Ok(CandidateTrajectory {
        poly,
        end_state: *ce,
        samples,
        speed,
        cost: 0.0,
        collision_checked: false,
        feasible: false,
        clearance: f64::INFINITY,
    })
}

/// Unweighted cost terms, in the same order as the fields of [`CostWeights`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CostTerms {
    pub section_length: f64,
    pub curvature: f64,
    pub curvature_rate: f64,
    pub curvature_accel: f64,
    pub curvature_jerk: f64,
    pub center_offset: f64,
    pub lateral_accel: f64,
    pub longitudinal_accel: f64,
    pub lateral_jerk: f64,
    pub longitudinal_jerk: f64,
    pub consistency: f64,
    pub duration: f64,
}

impl CostTerms {
    fn as_array(&self) -> [f64; 12] {
        [
            self.section_length,
            self.curvature,
            self.curvature_rate,
            self.curvature_accel,
            self.curvature_jerk,
            self.center_offset,
            self.lateral_accel,
            self.longitudinal_accel,
            self.lateral_jerk,
            self.longitudinal_jerk,
            self.consistency,
            self.duration,
        ]
    }

    pub fn weighted(&self, w: &CostWeights) -> f64 {
        self.as_array().iter().zip(w.as_array()).map(|(t, w)| t * w).sum()
    }
}

/// Sum of squared lateral differences to `previous`, pairing each sample with
/// the previous sample of nearest station. Samples past either end of the
/// previous trajectory are skipped.
fn consistency(traj: &CandidateTrajectory, previous: &CandidateTrajectory) -> f64 {
    let prev = &previous.samples;
    let (Some(first), Some(last)) = (prev.first(), prev.last()) else {
        return 0.0;
    };
    let mut sum = 0.0;
    for p in &traj.samples {
        if p.l < first.l || p.l > last.l {
            continue;
        }
        let j = prev.partition_point(|q| q.l < p.l);
        let k = if j == 0 {
            0
        } else if j == prev.len() || (p.l - prev[j - 1].l) <= (prev[j].l - p.l) {
            j - 1
        } else {
            j
        };
        let e = p.d - prev[k].d;
        sum += e * e;
    }
    sum
}

pub fn cost_terms(traj: &CandidateTrajectory, previous: Option<&CandidateTrajectory>) -> Result<CostTerms, PlannerError> {
    if traj.samples.len() < 2 {
        return Err(PlannerError::TooFewSamples { got: traj.samples.len() });
    }
    if !(traj.speed > 0.0) {
        return Err(PlannerError::NonpositiveSpeed { speed: traj.speed });
    }
    let mut c = CostTerms::default();
    for (i, p) in traj.samples.iter().enumerate() {
        if i > 0 {
            c.section_length += p.ds * p.ds;
            let dt = p.ds / traj.speed;
            c.duration += dt * dt;
        }
        c.curvature += p.point.curvature * p.point.curvature;
        c.curvature_rate += p.kappa_dot * p.kappa_dot;
        c.curvature_accel += p.kappa_ddot * p.kappa_ddot;
        c.curvature_jerk += p.kappa_dddot * p.kappa_dddot;
        c.center_offset += p.d * p.d;
        c.lateral_accel += p.a_lat * p.a_lat;
        c.longitudinal_accel += p.a_lon * p.a_lon;
        c.lateral_jerk += p.a_lat_dot * p.a_lat_dot;
        c.longitudinal_jerk += p.a_lon_dot * p.a_lon_dot;
    }
    if let Some(prev) = previous {
        c.consistency = consistency(traj, prev);
    }
    Ok(c)
}

/// Weighted total cost of `traj`. Without `previous` the consistency term
/// is zero.
pub fn evaluate_cost(traj: &CandidateTrajectory, weights: &CostWeights, previous: Option<&CandidateTrajectory>) -> Result<f64, PlannerError> {
    Ok(cost_terms(traj, previous)?.weighted(weights))
}
