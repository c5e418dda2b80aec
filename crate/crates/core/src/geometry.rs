//! Planar geometry shared by every stage: points, arc-length paths and the
//! Cartesian <-> Frenet maps.
//!
//! Lateral offsets are signed with left-of-tangent positive everywhere in the
//! crate (planner, tracker and simulator all rely on it).

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Neg, Sub};
#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use serde::{Deserialize, Serialize};

/// Default search radius for [`ReferenceLine::project`].
pub const DEFAULT_PROJECTION_HORIZON: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("path has fewer than two points")]
    EmptyPath,
    #[error("point is {distance} m from the path, beyond the {horizon} m horizon")]
    PointOutOfRange { distance: f64, horizon: f64 },
    #[error("station {station} m is outside [0, {length}] m")]
    StationOutOfRange { station: f64, length: f64 },
    #[error("offset {d} m crosses the centre of curvature (d*kappa = {product})")]
    CurvatureSingularity { d: f64, product: f64 },
    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("points {index} and {} coincide", index + 1)]
    DegenerateSpacing { index: usize },
    #[error("stations must increase strictly (violated at index {index})")]
    NonMonotonicStation { index: usize },
    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },
}

/// A point (or free vector) in the plane, metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    pub fn distance_sq(self, other: Self) -> f64 {
        let d = self - other;
        d.dot(d)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn lerp(self, other: Self, u: f64) -> Self {
        self + (other - self) * u
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Point2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Self::new(x, y)
    }
}

impl From<Point2> for [f64; 2] {
    fn from(p: Point2) -> Self {
        [p.x, p.y]
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Self) -> Self {
        Self::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Self {
        Self::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn wrap_angle(theta: f64) -> f64 {
    let mut a = theta % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PathPoint {
    pub position: Point2,
    pub heading: f64,
    pub curvature: f64,
    /// Cumulative arc length.
    pub s: f64,
}

/// Position in the curvilinear frame of a reference line. `d_dot` and
/// `d_ddot` are derivatives with respect to the station `l`, not time.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FrenetState {
    pub l: f64,
    pub d: f64,
    pub d_dot: f64,
    pub d_ddot: f64,
}

impl FrenetState {
    pub const fn new(l: f64, d: f64, d_dot: f64, d_ddot: f64) -> Self {
        Self { l, d, d_dot, d_ddot }
    }

    pub fn is_finite(&self) -> bool {
        self.l.is_finite() && self.d.is_finite() && self.d_dot.is_finite() && self.d_ddot.is_finite()
    }
}

/// Reference-line quantities interpolated at an arbitrary station.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSample {
    pub position: Point2,
    pub heading: f64,
    pub curvature: f64,
    /// d(curvature)/ds on the enclosing segment.
    pub curvature_rate: f64,
}

/// Arc-length parameterised path the planner and tracker work against.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceLine {
    points: Vec<PathPoint>,
    spacing: f64,
    /// Station span over segment count, for segment lookup.
    mean_step: f64,
}

impl ReferenceLine {
    pub fn new(points: Vec<PathPoint>, spacing: f64) -> Result<Self, GeometryError> {
        if points.len() < 2 {
            return Err(GeometryError::EmptyPath);
        }
        for (i, p) in points.iter().enumerate() {
            if !(p.position.is_finite() && p.heading.is_finite() && p.curvature.is_finite() && p.s.is_finite()) {
                return Err(GeometryError::NonFinite { index: i });
            }
        }
        if let Some(i) = points.windows(2).position(|w| w[1].s <= w[0].s) {
            return Err(GeometryError::NonMonotonicStation { index: i + 1 });
        }
        let mean_step = (points[points.len() - 1].s - points[0].s) / (points.len() - 1) as f64;
        Ok(Self { points, spacing, mean_step })
    }

    /// Builds a line from bare positions: chord-length stations, central-chord
    /// headings and three-point curvature.
    pub fn from_positions(positions: &[Point2], spacing: f64) -> Result<Self, GeometryError> {
        if positions.len() < 2 {
            return Err(GeometryError::EmptyPath);
        }
        if let Some(i) = positions.iter().position(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite { index: i });
        }
        let n = positions.len();
        let curvature = if n >= 3 { numeric_curvature(positions)? } else { alloc::vec![0.0; n] };
        let mut s = 0.0;
        let mut points = Vec::with_capacity(n);
        for i in 0..n {
            if i > 0 {
                let step = positions[i].distance(positions[i - 1]);
                if step <= 0.0 {
                    return Err(GeometryError::DegenerateSpacing { index: i - 1 });
                }
                s += step;
            }
            let (a, b) = match i {
                0 => (positions[0], positions[1]),
                _ if i == n - 1 => (positions[n - 2], positions[n - 1]),
                _ => (positions[i - 1], positions[i + 1]),
            };
            points.push(PathPoint {
                position: positions[i],
                heading: (b - a).angle(),
                curvature: curvature[i],
                s,
            });
        }
        Self::new(points, spacing)
    }

    pub fn points(&self) -> &[PathPoint] {
        &self.points
    }

    pub fn into_points(self) -> Vec<PathPoint> {
        self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn start_station(&self) -> f64 {
        self.points[0].s
    }

    pub fn end_station(&self) -> f64 {
        self.points[self.points.len() - 1].s
    }

    pub fn length(&self) -> f64 {
        self.end_station() - self.start_station()
    }

    pub fn positions(&self) -> Vec<Point2> {
        self.points.iter().map(|p| p.position).collect()
    }

    /// Index `i` of the segment `[i, i+1]` containing station `l` (clamped).
    /// Last segment whose start station is `<= l`, clamped to the valid
    /// range. Samples are close to uniform, so a guess from the mean step
    /// is at most a few steps off.
    fn segment_at(&self, l: f64) -> usize {
        let last = self.points.len() - 2;
        let guess = (l - self.points[0].s) / self.mean_step;
        let mut i = if guess.is_nan() { 0 } else { (guess.max(0.0) as usize).min(last) };
        while i > 0 && self.points[i].s > l {
            i -= 1;
        }
        while i < last && self.points[i + 1].s <= l {
            i += 1;
        }
        i
    }

    /// Index of the sample whose station is nearest to `l`.
    pub fn nearest_index(&self, l: f64) -> usize {
        let i = self.segment_at(l);
        if (l - self.points[i].s).abs() <= (self.points[i + 1].s - l).abs() {
            i
        } else {
            i + 1
        }
    }

    /// Linear interpolation of position, heading and curvature at station `l`.
    pub fn sample(&self, l: f64) -> Result<LineSample, GeometryError> {
        let (lo, hi) = (self.start_station(), self.end_station());
        let tol = 1e-9 * (1.0 + hi.abs());
        if !(l >= lo - tol && l <= hi + tol) {
            return Err(GeometryError::StationOutOfRange { station: l, length: hi });
        }
        Ok(self.sample_clamped(l))
    }

    fn sample_clamped(&self, l: f64) -> LineSample {
        let i = self.segment_at(l);
        let (a, b) = (&self.points[i], &self.points[i + 1]);
        let ds = b.s - a.s;
        let u = ((l - a.s) / ds).clamp(0.0, 1.0);
        LineSample {
            position: a.position.lerp(b.position, u),
            heading: wrap_angle(a.heading + u * wrap_angle(b.heading - a.heading)),
            curvature: a.curvature + u * (b.curvature - a.curvature),
            curvature_rate: (b.curvature - a.curvature) / ds,
        }
    }

    /// Projects `p` onto the line. See [`project_to_frenet`].
    pub fn project(&self, p: Point2, horizon: f64) -> Result<FrenetState, GeometryError> {
        let mut best = (f64::INFINITY, 0usize, 0.0);
        for (i, w) in self.points.windows(2).enumerate() {
            let (a, b) = (w[0].position, w[1].position);
            let ab = b - a;
            let u = ((p - a).dot(ab) / ab.dot(ab)).clamp(0.0, 1.0);
            let dist = p.distance_sq(a.lerp(b, u));
            if dist < best.0 {
                best = (dist, i, u);
            }
        }
        let distance = best.0.sqrt();
        if distance > horizon {
            return Err(GeometryError::PointOutOfRange { distance, horizon });
        }
        let (lo, hi) = (self.start_station(), self.end_station());
        let (_, i, u) = best;
        let mut l = self.points[i].s + u * (self.points[i + 1].s - self.points[i].s);

        // Refine so that `p - r(l)` is normal to the interpolated heading. This
        // makes the projection the exact inverse of `frenet_to_cartesian`.
        for _ in 0..8 {
            let smp = self.sample_clamped(l);
            let rel = p - smp.position;
            let t = Point2::from_angle(smp.heading);
            let f = rel.dot(t);
            let d = rel.dot(t.perp());
            let slope = 1.0 - smp.curvature * d;
            if slope <= 1e-6 {
                break;
            }
            let next = (l + f / slope).clamp(lo, hi);
            let done = (next - l).abs() < 1e-13 * (1.0 + l.abs());
            l = next;
            if done {
                break;
            }
        }
        let smp = self.sample_clamped(l);
        let d = (p - smp.position).dot(Point2::from_angle(smp.heading).perp());
        Ok(FrenetState::new(l, d, 0.0, 0.0))
    }
}

/// Station and signed offset of `p` relative to `line`.
///
/// The nearest piecewise-linear segment seeds the search; the station is then
/// refined against the interpolated heading field so that this map and
/// [`frenet_to_cartesian`] invert each other to rounding error.
pub fn project_to_frenet(line: &ReferenceLine, p: Point2) -> Result<FrenetState, GeometryError> {
    line.project(p, DEFAULT_PROJECTION_HORIZON)
}

/// Cartesian pose of a Frenet state, with heading and curvature of the offset
/// curve `d(l)` derived from its first two derivatives.
pub fn frenet_to_cartesian(line: &ReferenceLine, f: &FrenetState) -> Result<PathPoint, GeometryError> {
    let r = line.sample(f.l)?;
    let one_minus_kd = 1.0 - r.curvature * f.d;
    if one_minus_kd <= 0.0 {
        return Err(GeometryError::CurvatureSingularity {
            d: f.d,
            product: r.curvature * f.d,
        });
    }
    let normal = Point2::from_angle(r.heading).perp();
    let dtheta = f.d_dot.atan2(one_minus_kd);
    let (sin_dt, cos_dt) = dtheta.sin_cos();
    let tan_dt = sin_dt / cos_dt;
    let kd_term = r.curvature_rate * f.d + r.curvature * f.d_dot;
    let curvature = ((f.d_ddot + kd_term * tan_dt) * cos_dt * cos_dt / one_minus_kd + r.curvature) * cos_dt / one_minus_kd;
    Ok(PathPoint {
        position: r.position + normal * f.d,
        heading: wrap_angle(r.heading + dtheta),
        curvature,
        s: f.l,
    })
}

/// Signed curvature of three points via their circumscribed circle (left
/// turns positive).
pub fn three_point_curvature(a: Point2, b: Point2, c: Point2) -> f64 {
    let denom = a.distance(b) * b.distance(c) * a.distance(c);
    if denom == 0.0 {
        return 0.0;
    }
    2.0 * (b - a).cross(c - b) / denom
}

/// Per-point curvature of a sampled curve. Interior points use the
/// circumscribed circle through their neighbours; endpoints copy the adjacent
/// interior value.
pub fn numeric_curvature(points: &[Point2]) -> Result<Vec<f64>, GeometryError> {
    let n = points.len();
    if n < 3 {
        return Err(GeometryError::TooFewPoints { needed: 3, got: n });
    }
    if let Some(i) = points.windows(2).position(|w| w[0] == w[1]) {
        return Err(GeometryError::DegenerateSpacing { index: i });
    }
    let mut k = Vec::with_capacity(n);
    k.push(0.0);
    for w in points.windows(3) {
        k.push(three_point_curvature(w[0], w[1], w[2]));
    }
    k.push(k[n - 2]);
    k[0] = k[1];
    Ok(k)
}
